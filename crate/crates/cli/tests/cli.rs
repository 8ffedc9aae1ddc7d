use std::fs;
use std::path::Path;
use std::process::Command;

fn downselect(dir: &Path, args: &str) -> String {
    let out =
        Command::new(env!("CARGO_BIN_EXE_downselect")).current_dir(dir).args(args.split_whitespace()).output().unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn stages_chain_through_files() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    downselect(d, "synth --dir . --users 8 --tools 5 --seed 2");
    downselect(d, "impute --ratings ratings.csv --comments comments.csv --folds 4 --orders 1,inf --out imp.csv --params-out params.json");
    downselect(d, "predict --populated imp.csv --out pred.csv --report models.csv --baseline-ratings ratings.csv --params params.json --folds 3");
    let models = fs::read_to_string(d.join("models.csv")).unwrap();
    assert!(models.starts_with("model,cv_mse\n") && models.contains("\nak_baseline,"));

    downselect(d, "aggregate --populated pred.csv --rankings rankings.csv --out pr.csv --graph-out g.csv");
    assert!(d.join("g_raw.csv").exists());
    let stats = downselect(d, "stats --populated pred.csv --profiles profiles.csv");
    assert!(stats.lines().any(|l| l.starts_with("familiarity_kruskal,")));

    let boards = downselect(d, "report --populated pred.csv --pagerank pr.csv");
    for method in ["raw_mean", "pr_raw", "ml_mean", "ml_pr"] {
        assert_eq!(boards.lines().filter(|l| l.starts_with(&format!("{method},"))).count(), 5, "{method}");
    }
}

#[test]
fn report_refuses_unfilled_overall() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    downselect(d, "synth --dir . --users 6 --tools 4 --missing 0.5 --seed 1");
    fs::write(d.join("pr.csv"), "tool_id,pr_raw,ml_pr\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_downselect"))
        .current_dir(d)
        .args(["report", "--populated", "ratings.csv", "--pagerank", "pr.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("run `predict` first"));
}

#[test]
fn power_sim_and_assign_write_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let power = downselect(d, "power-sim --mean-a 3.65 --var-a 1.17 --m 10,20 --trials 200");
    assert!(power.starts_with("scenario,test,threshold,10,20\n"));
    let plan = downselect(d, "assign --tools 6 --participants 10 --per 3 --restarts 5");
    assert_eq!(plan.lines().count(), 1 + 10 * 3);
}
