use aoc_web::{emit_c, plan_json, simulate_json};

const COUNTER: &str = "module top(input clk, input en, output reg [7:0] count);
  always @(posedge clk) if (en) count <= count + 8'd1;
endmodule
";

#[test]
fn simulate_reports_waves_and_counts() {
    let v = simulate_json(COUNTER, "", "clock clk 2\n0 en 1\n20 en 0\n", 40, 2).unwrap();
    assert!(v["oracle_mismatch"].is_null());
    let count = v["signals"]
        .as_array()
        .unwrap()
        .iter()
        .find(|s| s["name"] == "top_count")
        .unwrap();
    // ten rising edges while enabled
    assert_eq!(count["changes"].as_array().unwrap().last().unwrap()[1], "0a");
    let e = &v["evaluations"];
    assert!(e["gated"].as_u64().unwrap() < e["full"].as_u64().unwrap());
}

#[test]
fn plan_has_merge_log() {
    let v = plan_json(COUNTER, "top", 1).unwrap();
    assert!(v["partitions"]["pods"]
        .as_array()
        .unwrap()
        .iter()
        .all(|p| p["merge_log"].is_array()));
    assert_eq!(v["schedule"]["top"], "top");
}

#[test]
fn errors_are_reported() {
    assert!(simulate_json("module top(", "", "", 10, 1).is_err());
    assert!(emit_c(COUNTER, "", 1, 16).is_err());
    assert!(emit_c(COUNTER, "", 1, 32).unwrap().contains("#include"));
}
