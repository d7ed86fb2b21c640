use serde_json::Value;
use stepdown_demo::{adjust_table, constant_curves, sharpness_run};

fn parse(s: &str) -> Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn curves_are_nondecreasing_and_end_at_alpha() {
    let v = parse(&constant_curves(40, 0.05, 3, "1/10").unwrap());
    for series in v["series"].as_array().unwrap() {
        let vals: Vec<f64> = series["values"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
        assert_eq!(vals.len(), 40);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]), "{}", series["method"]);
    }
    let holm = &v["series"][0]["values"];
    assert_eq!(holm[39].as_f64().unwrap(), 0.05);
}

#[test]
fn adjust_matches_core_report() {
    let text = "id,pvalue\nx,0.04\ny,0.001\nz,0.03\nw,0.5\n";
    let v = parse(&adjust_table(text, "kfwer-sd", 0.1, 2, "").unwrap());
    let pv = stepdown::parse_table(text).unwrap();
    let spec = stepdown::ProcedureSpec::new(stepdown::Method::KfwerStepdown, 0.1).with_k(2);
    let report = stepdown::adjusted_pvalues(&stepdown::order_pvalues(&pv), &spec).unwrap();
    assert_eq!(v, serde_json::to_value(&report).unwrap());
}

#[test]
fn sharpness_is_reproducible() {
    let setup = r#"{"construction":"thm23","s":10,"k":2,"i":5,"alpha":0.05,"inflation":1.2}"#;
    let a = sharpness_run(setup, 5_000, 9).unwrap();
    assert_eq!(a, sharpness_run(setup, 5_000, 9).unwrap());
    assert_eq!(parse(&a)["construction"], "thm23");
}
