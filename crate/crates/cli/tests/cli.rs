use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn aoc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoc"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn fixture(rel: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "core", "tests", rel]
        .iter()
        .collect();
    p.canonicalize().unwrap().display().to_string()
}

fn status(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn sim_writes_vcd() {
    let dir = tempfile::tempdir().unwrap();
    let o = aoc(
        &[
            "sim",
            "-t",
            "top",
            &fixture("corpus/counter.v"),
            "--cycles",
            "100",
            "--vcd",
            "out.vcd",
        ],
        dir.path(),
    );
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let vcd = std::fs::read_to_string(dir.path().join("out.vcd")).unwrap();
    assert!(vcd.contains("$enddefinitions $end"));
    assert!(vcd.contains("\n#99\n"));
}

#[test]
fn loop_is_a_design_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = aoc(&["check", &fixture("corpus/loopy.v"), "-t", "top"], dir.path());
    assert_eq!(status(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("combinational loop"), "{err}");
}

#[test]
fn backends_agree_on_vcd() {
    let dir = tempfile::tempdir().unwrap();
    let stim = dir.path().join("s.stim");
    std::fs::write(&stim, "clock clk 2\n0 rst 1\n3 rst 0\n3 en 1\n40 en 0\n50 en 1\n").unwrap();
    let stim = stim.display().to_string();
    for (backend, out) in [("aoc", "a.vcd"), ("aoc-full", "f.vcd"), ("oracle", "o.vcd")] {
        let o = aoc(
            &[
                "sim",
                &fixture("corpus/counter.v"),
                "--stim",
                &stim,
                "--cycles",
                "300",
                "--backend",
                backend,
                "--vcd",
                out,
            ],
            dir.path(),
        );
        assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let read = |f: &str| std::fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.vcd"), read("o.vcd"));
    assert_eq!(read("f.vcd"), read("o.vcd"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(status(&aoc(&["frobnicate"], dir.path())), 1);
    assert_eq!(
        status(&aoc(
            &["sim", "--backend", "fast", &fixture("corpus/counter.v")],
            dir.path()
        )),
        1
    );
    assert_eq!(status(&aoc(&["sim"], dir.path())), 1);
    assert_eq!(status(&aoc(&["check", "missing.v"], dir.path())), 1);
    assert_eq!(
        status(&aoc(&["check", &fixture("corpus/counter.v"), "--cw", "16"], dir.path())),
        1
    );
    assert_eq!(status(&aoc(&["--help"], dir.path())), 0);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("aoc.cfg"),
        "# run settings\ntdmax = 1\nphmax=4\ntimescale=10ps\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "speed=3\n").unwrap();
    let design = fixture("corpus/two_clocks.v");
    let o = aoc(
        &["sim", &design, "--config", "aoc.cfg", "--vcd", "c.vcd", "--cycles", "4"],
        dir.path(),
    );
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(dir.path().join("c.vcd"))
        .unwrap()
        .contains("$timescale 10ps $end"));
    let parts = |extra: &[&str]| {
        let mut args = vec!["check", design.as_str(), "--config", "aoc.cfg", "--dump-partitions"];
        args.extend_from_slice(extra);
        let o = aoc(&args, dir.path());
        assert_eq!(status(&o), 0);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        v.to_string()
    };
    assert_ne!(parts(&[]), parts(&["--threads", "4"]));
    assert_eq!(status(&aoc(&["check", &design, "--config", "bad.cfg"], dir.path())), 1);
}

#[test]
fn dumps_are_json() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("corpus/two_clocks.v");
    for flag in ["--dump-domains", "--dump-schedule", "--dump-partitions"] {
        let o = aoc(&["dump", &f, flag], dir.path());
        assert_eq!(status(&o), 0);
        serde_json::from_slice::<serde_json::Value>(&o.stdout).unwrap();
    }
    // the netlist export loads back as an input
    let o = aoc(&["dump", &f], dir.path());
    std::fs::write(dir.path().join("n.json"), &o.stdout).unwrap();
    let a = aoc(&["sim", &f, "--cycles", "50", "--vcd", "a.vcd"], dir.path());
    let b = aoc(&["sim", "n.json", "--cycles", "50", "--vcd", "b.vcd"], dir.path());
    assert_eq!((status(&a), status(&b)), (0, 0));
    assert_eq!(
        std::fs::read(dir.path().join("a.vcd")).unwrap(),
        std::fs::read(dir.path().join("b.vcd")).unwrap()
    );
}

#[test]
fn emit_split_and_single() {
    let dir = tempfile::tempdir().unwrap();
    let f = fixture("corpus/adder70.v");
    assert_eq!(
        status(&aoc(&["emit", &f, "--out", "model.c", "--cw", "32"], dir.path())),
        0
    );
    let c = std::fs::read_to_string(dir.path().join("model.c")).unwrap();
    assert!(c.starts_with("#include \"model.h\""));
    assert!(dir.path().join("model.h").exists());
    assert_eq!(
        status(&aoc(&["emit", &f, "--out", "one.c", "--single-file"], dir.path())),
        0
    );
    assert!(!dir.path().join("one.h").exists());
}

#[test]
fn testbench_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = aoc(
        &[
            "sim",
            "--tb",
            &fixture("tb/counter_tb.v"),
            "--top",
            "cnt",
            "--vcd",
            "tb.vcd",
        ],
        dir.path(),
    );
    assert_eq!(status(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout), "q=1 at 15\ndone at 45\n");
    let vcd = std::fs::read_to_string(dir.path().join("tb.vcd")).unwrap();
    assert!(vcd.contains("\n#12\n"));
    assert_eq!(
        status(&aoc(&["sim", "--tb", &fixture("tb/deadlock_tb.v")], dir.path())),
        3
    );
    assert_eq!(
        status(&aoc(&["sim", "--tb", &fixture("tb/wait_in_dut_tb.v")], dir.path())),
        2
    );
}
