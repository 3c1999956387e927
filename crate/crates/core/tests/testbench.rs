use aoc::frontend::parse_text;
use aoc::ir::FlatDesign;
use aoc::oracle::Oracle;
use aoc::partition::ExecConfig;
use aoc::pipeline::{flatten, make_model, Backend};
use aoc::sim::{run, CycleModel, SimError};
use aoc::stimulus::Stimulus;
use aoc::testbench::{find_testbench, partition_tcp, TbError, Testbench, Wake};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/tests/tb/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn setup(name: &str) -> (Testbench, FlatDesign) {
    let mods = parse_text(name, &fixture(name)).unwrap();
    let tb_name = find_testbench(&mods).unwrap();
    let tb = Testbench::build(&mods, &tb_name).unwrap();
    let d = flatten(&mods, Some(&tb.dut_module)).unwrap();
    (tb, d)
}

fn aoc_model(d: FlatDesign) -> Box<dyn CycleModel + Send> {
    let cfg = ExecConfig {
        tdmax: 2,
        ..ExecConfig::default()
    };
    make_model(d, Backend::Aoc, cfg, 2).unwrap()
}

#[test]
fn delay_process_wakes_at_ten() {
    let (mut tb, d) = setup("counter_tb.v");
    let out = tb.run(aoc_model(d).as_mut(), None).unwrap();
    // process 1 is `initial #10 mark = 1`
    let wakes: Vec<u64> = out.wakes.iter().filter(|w| w.process == 1).map(|w| w.time).collect();
    assert_eq!(wakes, vec![0, 10]);
    assert_eq!(tb.value("mark").unwrap().to_u64(), 1);
}

#[test]
fn signal_wait_resumes_in_the_step_of_the_change() {
    let (mut tb, d) = setup("counter_tb.v");
    let out = tb.run(aoc_model(d.clone()).as_mut(), None).unwrap();
    // reset is released at 12, so the first increment lands on the edge at 15
    let watcher: Vec<u64> = out.wakes.iter().filter(|w| w.process == 3).map(|w| w.time).collect();
    assert_eq!(watcher, vec![0, 15, 25, 35, 45]);
    assert!(out.finished);
    assert_eq!(out.end_time, 45);
    assert_eq!(out.log, vec!["q=1 at 15".to_string(), "done at 45".to_string()]);

    // the same testbench driving the event-driven oracle wakes identically
    let (mut tb2, _) = setup("counter_tb.v");
    let mut o = Oracle::new(d);
    let out2 = tb2.run(&mut o, None).unwrap();
    assert_eq!(out.wakes, out2.wakes);
    assert!(out.trace.first_mismatch(&out2.trace).is_none());
}

#[test]
fn clock_generator_is_one_cyclic_segment() {
    let mods = parse_text("counter_tb.v", &fixture("counter_tb.v")).unwrap();
    let tb = mods.iter().find(|m| m.name == "tb").unwrap();
    let procs = partition_tcp(tb).unwrap();
    assert_eq!(procs.len(), 4);
    // `forever #5 clk = ~clk` loops through a single segment
    assert_eq!(procs[0].segments.len(), 1);
    // `@(q)` then three `@(posedge clk)` waits inside a repeat
    assert_eq!(procs[3].segments.len(), 3);

    let (mut tbx, d) = setup("counter_tb.v");
    let out = tbx.run(aoc_model(d).as_mut(), Some(20)).unwrap();
    let clk: Vec<u64> = out.wakes.iter().filter(|w| w.process == 0).map(|w| w.time).collect();
    assert_eq!(clk, vec![0, 5, 10, 15, 20]);
}

#[test]
fn deadlock_is_reported() {
    let (mut tb, d) = setup("deadlock_tb.v");
    let err = tb.run(&mut Oracle::new(d), None).unwrap_err();
    match err {
        TbError::Sim(SimError::Deadlock { time, .. }) => assert_eq!(time, 3),
        other => panic!("expected deadlock, got {other}"),
    }
}

#[test]
fn timing_inside_the_design_is_rejected() {
    let mods = parse_text("w.v", &fixture("wait_in_dut_tb.v")).unwrap();
    let err = Testbench::build(&mods, "tb").err().unwrap();
    assert!(
        matches!(err, TbError::WaitInsideDut { ref module, .. } if module == "bad"),
        "{err}"
    );
}

#[test]
fn same_time_wakeups_follow_declaration_order() {
    let src = "module p(input a, output y); assign y = a; endmodule
module tb; reg a = 0; wire y; reg [7:0] log = 0; p u(.a(a), .y(y));
initial #4 log = log * 8'd10 + 8'd1;
initial #4 log = log * 8'd10 + 8'd2;
initial #4 log = log * 8'd10 + 8'd3;
endmodule";
    let mods = parse_text("o.v", src).unwrap();
    let mut tb = Testbench::build(&mods, "tb").unwrap();
    let d = flatten(&mods, Some("p")).unwrap();
    let out = tb.run(&mut Oracle::new(d), None).unwrap();
    assert_eq!(tb.value("log").unwrap().to_u64(), 123);
    let at4: Vec<usize> = out.wakes.iter().filter(|w| w.time == 4).map(|w| w.process).collect();
    assert_eq!(at4, vec![0, 1, 2]);
    assert!(!out.finished);
}

#[test]
fn zero_delay_loop_hits_the_delta_cap() {
    let src = "module p(input a, output y); assign y = a; endmodule
module tb; reg a = 0; wire y; p u(.a(a), .y(y));
always @(y) a = ~a;
initial #1 a = 1;
endmodule";
    let mods = parse_text("z.v", src).unwrap();
    let mut tb = Testbench::build(&mods, "tb").unwrap();
    let d = flatten(&mods, Some("p")).unwrap();
    let err = tb.run(&mut Oracle::new(d), None).unwrap_err();
    assert!(matches!(err, TbError::Sim(SimError::Deadlock { time: 1, .. })), "{err}");
}

#[test]
fn testbench_run_equals_stimulus_run() {
    let (mut tb, d) = setup("stim_tb.v");
    let out = tb.run(aoc_model(d.clone()).as_mut(), None).unwrap();
    assert!(out.finished);
    // one design step per time unit, so time stamps line up with cycles
    let stim = Stimulus::parse(&fixture("acc.stim")).unwrap().resolve(&d).unwrap();
    let mut stim = stim;
    let mut m = aoc_model(d);
    let cyc = run(m.as_mut(), &mut stim, out.end_time).unwrap();
    let a = out.trace.snapshots();
    let b = cyc.snapshots();
    assert_eq!(b.len() as u64, out.end_time);
    assert_eq!(&a[..b.len()], &b[..]);
}

#[test]
fn wake_records_are_time_ordered() {
    let (mut tb, d) = setup("counter_tb.v");
    let out = tb.run(&mut Oracle::new(d), None).unwrap();
    assert!(out.wakes.windows(2).all(|w: &[Wake]| w[0].time <= w[1].time));
}
