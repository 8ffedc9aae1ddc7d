//! One line per acceptance criterion; exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use downselect_core::assignment::best_of_k;
use downselect_core::demostats::{kruskal_wallis, manova_one_way, regress_rating_on_experience};
use downselect_core::imputation::{
    default_grid, grid_search_cv, populate, predict_entry, rating_distance, DistanceMode, DistanceOrder,
    SimilarityMatrix,
};
use downselect_core::likert::{Aspect, AspectRanking, AspectRankings, RatingsTensor, ToolRanking, N_SLOTS};
use downselect_core::powersim::{fit_discrete_dist, run_power_simulation, ScenarioConfig, TestKind};
use downselect_core::preference::{build_graph, edges_from_user, pagerank, ranking_scores};
use downselect_core::regression::{
    gradient_check_at, select_model, train, train_ols, ModelKind, Objective, RegressionDataset,
};

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn timed<F: FnOnce() -> Outcome>(limit: Duration, f: F) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    out.detail.push_str(&format!("; {:.2}s (limit {}s)", took.as_secs_f64(), limit.as_secs()));
    out.pass &= took < limit;
    out
}

fn c1_size() -> Outcome {
    timed(Duration::from_secs(10), || {
        let d = fit_discrete_dist(3.65, 1.17).unwrap();
        let cfg = ScenarioConfig {
            dist_a: d.clone(),
            dist_b: d,
            review_counts: vec![30],
            n_trials: 5000,
            alpha: 0.05,
            thresholds: vec![3.5],
            seed: 1,
        };
        let frac = run_power_simulation(&cfg).unwrap().fraction(TestKind::Welch, None, 30).unwrap();
        outcome((0.035..=0.065).contains(&frac), format!("welch rejection {frac:.4} in [0.035, 0.065]"))
    })
}

fn c2_power() -> Outcome {
    let ms = vec![10, 15, 25, 30, 35, 40];
    let cfg = ScenarioConfig {
        dist_a: fit_discrete_dist(3.65, 1.17).unwrap(),
        dist_b: fit_discrete_dist(2.93, 0.923).unwrap(),
        review_counts: ms.clone(),
        n_trials: 1000,
        alpha: 0.05,
        thresholds: vec![3.5],
        seed: 2,
    };
    let table = run_power_simulation(&cfg).unwrap();
    let row = &table.row(TestKind::ZTest, Some(3.5)).unwrap().fractions;
    let at25 = row[ms.iter().position(|&m| m == 25).unwrap()];
    let monotone = row.windows(2).all(|w| w[1] >= w[0] - 0.05);
    outcome(
        at25 >= 0.90 && monotone,
        format!("z-test power at m=25 is {at25:.3} (need >= 0.90); monotone within 0.05: {monotone}; row {row:?}"),
    )
}

fn c3_assignment() -> Outcome {
    timed(Duration::from_secs(30), || {
        let plan = best_of_k(11, 59, 8, 100, 0).unwrap();
        let err = plan.assignment_error();
        let hist = plan.count_histogram();
        let support_ok = hist.iter().all(|&(c, _)| (28..=32).contains(&c));
        let support: Vec<u32> = hist.iter().map(|h| h.0).collect();
        outcome(err <= 0.35 && support_ok, format!("error {err:.4} (<= 0.35), pair counts {support:?} within 28..=32"))
    })
}

fn oracle_naive(a: &[f64], b: &[f64], p: DistanceOrder) -> f64 {
    let gaps = a.iter().zip(b).map(|(x, y)| (x - y).abs());
    match p {
        DistanceOrder::Zero => gaps.filter(|g| *g != 0.0).count() as f64,
        DistanceOrder::One => gaps.sum(),
        DistanceOrder::Two => gaps.map(|g| g * g).sum::<f64>().sqrt(),
        DistanceOrder::Inf => gaps.fold(0.0, f64::max),
    }
}

/// Average naive distance over every uniform completion of the missing entries.
fn oracle_bayesian(a: &[Option<f64>], b: &[Option<f64>], p: DistanceOrder) -> f64 {
    let holes: Vec<(usize, usize)> = [a, b]
        .iter()
        .enumerate()
        .flat_map(|(side, v)| v.iter().enumerate().filter(|(_, x)| x.is_none()).map(move |(i, _)| (side, i)))
        .collect();
    let total = 5usize.pow(holes.len() as u32);
    let mut sum = 0.0;
    for code in 0..total {
        let mut full = [
            a.iter().map(|x| x.unwrap_or(0.0)).collect::<Vec<_>>(),
            b.iter().map(|x| x.unwrap_or(0.0)).collect::<Vec<_>>(),
        ];
        let mut c = code;
        for &(side, i) in &holes {
            full[side][i] = (c % 5 + 1) as f64;
            c /= 5;
        }
        sum += oracle_naive(&full[0], &full[1], p);
    }
    sum / total as f64
}

fn c4_bayesian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let len = rng.random_range(1..=5usize);
        let mut a: Vec<Option<f64>> = (0..len).map(|_| Some(rng.random_range(1..=5) as f64)).collect();
        let mut b: Vec<Option<f64>> = (0..len).map(|_| Some(rng.random_range(1..=5) as f64)).collect();
        let holes = rng.random_range(0..=3usize.min(2 * len));
        let mut cells: Vec<(usize, usize)> = (0..2).flat_map(|s| (0..len).map(move |i| (s, i))).collect();
        cells.shuffle(&mut rng);
        for &(s, i) in &cells[..holes] {
            if s == 0 {
                a[i] = None
            } else {
                b[i] = None
            }
        }
        for p in DistanceOrder::ALL {
            let got = rating_distance(&a, &b, p, DistanceMode::Bayesian).unwrap().value;
            worst = worst.max((got - oracle_bayesian(&a, &b, p)).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |bayesian - enumeration| = {worst:.2e} over 200 pairs x 4 orders"))
}

fn random_tensor(rng: &mut ChaCha8Rng, users: usize, tools: usize, missing: f64) -> RatingsTensor<f64> {
    let mut t = RatingsTensor::with_dims(users, tools);
    for u in 0..users {
        for j in 0..tools {
            for s in 0..N_SLOTS {
                if !rng.random_bool(missing) {
                    t.set(u, j, s, rng.random_range(1..=5) as f64).unwrap();
                }
            }
        }
    }
    t
}

/// Weighted average with similarities recomputed from scratch as exp(-naive distance).
fn brute_force_entry(t: &RatingsTensor<f64>, (u, j, s): (usize, usize, usize), p: DistanceOrder, users: bool) -> f64 {
    let slice = |k: usize| -> Vec<Option<f64>> {
        if users {
            t.user_slice(k).to_vec()
        } else {
            t.tool_slice(k)
        }
    };
    let dist = |x: &[Option<f64>], y: &[Option<f64>]| {
        let pairs: Vec<(f64, f64)> = x.iter().zip(y).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect();
        if pairs.is_empty() {
            let n = x.len() as f64;
            return match p {
                DistanceOrder::Zero => n,
                DistanceOrder::One => 4.0 * n,
                DistanceOrder::Two => 4.0 * n.sqrt(),
                DistanceOrder::Inf => 4.0,
            };
        }
        let (a, b): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        oracle_naive(&a, &b, p)
    };
    let (own, count) = if users { (u, t.n_users()) } else { (j, t.n_tools()) };
    let me = slice(own);
    let (mut num, mut den) = (0.0, 0.0);
    for d in (0..count).filter(|&d| d != own) {
        let v = if users { t.get(d, j, s) } else { t.get(u, d, s) };
        if let Some(v) = v {
            let w = (-dist(&me, &slice(d))).exp();
            num += w * v;
            den += w;
        }
    }
    if den > 0.0 {
        (num / den).clamp(1.0, 5.0)
    } else {
        t.slot_mean(s).unwrap_or(3.0)
    }
}

fn c5_eq1_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    let mut checked = 0;
    for k in 0..100 {
        let (users, tools) = (rng.random_range(2..=6), rng.random_range(2..=5));
        let t = random_tensor(&mut rng, users, tools, 0.35);
        let Some(target) = t.missing_entries().next() else { continue };
        let p = DistanceOrder::ALL[k % 4];
        let users = k % 2 == 0;
        let sim = if users {
            SimilarityMatrix::users(&t, p, DistanceMode::Naive)
        } else {
            SimilarityMatrix::tools(&t, p, DistanceMode::Naive)
        }
        .unwrap();
        let got = predict_entry(&t, target, &sim).unwrap().value;
        worst = worst.max((got - brute_force_entry(&t, target, p, users)).abs());
        checked += 1;
    }
    outcome(checked >= 95 && worst <= 1e-12, format!("{checked} tensors, max deviation {worst:.2e}"))
}

fn c6_recovery() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (users, tools) = (19, 11);
    let mut truth = RatingsTensor::<f64>::with_dims(users, tools);
    let mut observed = RatingsTensor::<f64>::with_dims(users, tools);
    let mut hidden = Vec::new();
    for u in 0..users {
        let centre = rng.random_range(1.5..4.5);
        for j in 0..tools {
            for s in 0..N_SLOTS {
                let v = centre + rng.random_range(-0.5..0.5);
                truth.set(u, j, s, v).unwrap();
                if rng.random_bool(0.33) {
                    hidden.push((u, j, s));
                } else {
                    observed.set(u, j, s, v).unwrap();
                }
            }
        }
    }
    let mut rankings = AspectRankings::new();
    for id in observed.users() {
        let mut order = Aspect::CAPABILITIES.to_vec();
        order.shuffle(&mut rng);
        rankings.insert(id.clone(), AspectRanking::from_order(&order).unwrap());
    }
    let cv = grid_search_cv(&observed, &rankings, &default_grid(), 20, 6).unwrap();
    let filled = populate(&observed, &cv.best, &rankings).unwrap();
    let mae = hidden
        .iter()
        .map(|&(u, j, s)| (filled.tensor.get(u, j, s).unwrap() - truth.get(u, j, s).unwrap()).abs())
        .sum::<f64>()
        / hidden.len() as f64;
    let b = cv.best;
    outcome(
        mae <= 0.5,
        format!("held-out MAE {mae:.4} (cv {:.4}) with p={} mode={} a={} b={}", cv.cv_error, b.p, b.mode, b.a, b.b),
    )
}

fn planted_linear(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64) {
    let w: Vec<f64> = (0..7).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b = rng.random_range(-2.0..2.0);
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..7).map(|_| rng.random_range(1..=5) as f64).collect()).collect();
    let y = x.iter().map(|r| b + r.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>()).collect();
    (x, y, w, b)
}

fn c7_regression() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (x, y, w, b) = planted_linear(&mut rng, 40);
    let ols = train_ols(&x, &y).unwrap();
    let (cw, cb) = ols.coefficients().unwrap();
    let coef_err = cw.iter().zip(&w).map(|(a, c)| (a - c).abs()).fold((cb - b).abs(), f64::max);

    let noisy: Vec<f64> = y.iter().map(|v| v + rng.random_range(-0.3..0.3)).collect();
    let mut grad_worst = 0.0f64;
    for kind in [ModelKind::Ols, ModelKind::Ridge, ModelKind::Sgd, ModelKind::KernelRidge, ModelKind::Mean] {
        let m = train(kind, &x, &noisy, 7).unwrap();
        let obj = Objective::new(&m, &x, &noisy);
        let mut p = obj.params();
        p.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1));
        grad_worst = grad_worst.max(gradient_check_at(&obj, &obj.params())).max(gradient_check_at(&obj, &p));
    }

    let mut ols_wins = 0;
    for seed in 0..20 {
        let mut r = ChaCha8Rng::seed_from_u64(100 + seed);
        let (x, y, _, _) = planted_linear(&mut r, 30);
        let keys = (0..x.len()).map(|i| (i, 0)).collect();
        let data = RegressionDataset::new(x, y, keys).unwrap();
        let sel = select_model(&data, &[ModelKind::Ols, ModelKind::Mean], 5, seed).unwrap();
        ols_wins += usize::from(sel.best == ModelKind::Ols);
    }
    outcome(
        coef_err <= 1e-6 && grad_worst <= 1e-5 && ols_wins == 20,
        format!("ols coefficient error {coef_err:.2e}; worst gradient rel. error {grad_worst:.2e}; ols selected {ols_wins}/20"),
    )
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn c8_pagerank() -> Outcome {
    let tools: Vec<String> = ["w", "x", "y", "z"].map(String::from).to_vec();
    let perms = permutations(&tools);
    let mut agree = 0;
    for order in &perms {
        let lists: Vec<_> = (0..5)
            .map(|u| {
                let r = ToolRanking::new(format!("u{u}"), order.clone()).unwrap();
                edges_from_user(&ranking_scores::<f64>(&r), None).unwrap()
            })
            .collect();
        let g = build_graph(tools.clone(), &lists).unwrap();
        agree += usize::from(pagerank::<f64>(&g, 0.85, 1e-8, 100).unwrap().order() == *order);
    }
    let scores: Vec<(String, f64)> = [("A", 5.0), ("B", 3.0), ("C", 1.0)].map(|(t, s)| (t.to_string(), s)).to_vec();
    let g =
        build_graph(["A", "B", "C"].map(String::from).to_vec(), &[edges_from_user(&scores, None).unwrap()]).unwrap();
    let pr = pagerank::<f64>(&g, 0.85, 1e-8, 100).unwrap();
    let (a, b, c) = (pr.get("A").unwrap(), pr.get("B").unwrap(), pr.get("C").unwrap());
    outcome(
        agree == perms.len() && a > b && b > c,
        format!("{agree}/{} unanimous orders recovered; example A={a:.4} B={b:.4} C={c:.4}", perms.len()),
    )
}

fn anova_f(groups: &[Vec<f64>]) -> f64 {
    let all: Vec<f64> = groups.iter().flatten().copied().collect();
    let grand = all.iter().sum::<f64>() / all.len() as f64;
    let (mut ssb, mut ssw) = (0.0, 0.0);
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand).powi(2);
        ssw += g.iter().map(|v| (v - m).powi(2)).sum::<f64>();
    }
    let k = groups.len() as f64;
    (ssb / (k - 1.0)) / (ssw / (all.len() as f64 - k))
}

fn c9_stats() -> Outcome {
    let h: f64 = kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap().h;

    let groups = vec![vec![2.0, 3.5, 4.0, 3.0], vec![1.0, 2.5, 2.0], vec![4.5, 5.0, 3.5, 4.0, 4.8]];
    let wrapped: Vec<Vec<Vec<f64>>> = groups.iter().map(|g| g.iter().map(|&v| vec![v]).collect()).collect();
    let manova_f = manova_one_way(&wrapped).unwrap().approx_f;
    let f_gap = (manova_f - anova_f(&groups)).abs();

    // x = 1..5, y = 2,4,5,4,5: slope 6/10, SSE 2.4, se = sqrt(2.4 / 3 / 10)
    let pts: Vec<(f64, f64)> = vec![(1.0, 2.0), (2.0, 4.0), (3.0, 5.0), (4.0, 4.0), (5.0, 5.0)];
    let wald = regress_rating_on_experience(&pts).unwrap();
    let wald_gap = (wald.slope - 0.6).abs().max((wald.slope_std_err - 0.08f64.sqrt()).abs());

    outcome(
        (h - 3.857).abs() <= 1e-3 && f_gap <= 1e-9 && wald_gap <= 1e-9,
        format!("H = {h:.4}; |F_manova - F_anova| = {f_gap:.1e}; wald slope/se deviation {wald_gap:.1e}"),
    )
}

fn downselect(args: &[&str]) -> Result<(), String> {
    downselect_cli::run_from(std::iter::once("downselect").chain(args.iter().copied())).map_err(|e| format!("{e:#}"))
}

fn synth_and_run(dir: &Path, missing: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let d = dir.to_str().unwrap();
    downselect(&["synth", "--dir", d, "--users", "19", "--tools", "11", "--missing", missing, "--seed", "10"])?;
    downselect(&["run", "--config", dir.join("study.toml").to_str().unwrap()])?;
    let mut files = BTreeMap::new();
    for entry in fs::read_dir(dir.join("out")).map_err(|e| e.to_string())? {
        let p = entry.map_err(|e| e.to_string())?.path();
        files.insert(p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).map_err(|e| e.to_string())?);
    }
    Ok(files)
}

fn board(csv: &[u8], method: &str) -> Vec<String> {
    String::from_utf8_lossy(csv)
        .lines()
        .filter(|l| l.split(',').next() == Some(method))
        .map(|l| l.split_once(',').unwrap().1.to_string())
        .collect()
}

fn c10_end_to_end() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let first = synth_and_run(&tmp.path().join("a"), "0.33");
    let took = start.elapsed();
    let second = synth_and_run(&tmp.path().join("b"), "0.33");
    let full = synth_and_run(&tmp.path().join("full"), "0");
    let (first, second, full) = match (first, second, full) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (a, b, c) => return outcome(false, format!("cli failed: {:?}", [a.err(), b.err(), c.err()])),
    };
    let boards = first.get("leaderboards.csv").cloned().unwrap_or_default();
    let methods = ["raw_mean", "pr_raw", "ml_mean", "ml_pr"];
    let all_four = methods.iter().all(|m| board(&boards, m).len() == 11);
    let identical = first == second;
    let lb = &full["leaderboards.csv"];
    let consistent = board(lb, "raw_mean") == board(lb, "ml_mean");
    outcome(
        took < Duration::from_secs(120) && all_four && identical && consistent,
        format!(
            "run {:.1}s (< 120s); four leaderboards: {all_four}; {} outputs byte-identical: {identical}; \
             raw_mean == ml_mean at 0% missing: {consistent}",
            took.as_secs_f64(),
            first.len()
        ),
    )
}

fn main() {
    let criteria: [Check; 10] = [
        ("power simulation size", c1_size),
        ("power simulation discrimination", c2_power),
        ("assignment quality", c3_assignment),
        ("bayesian distance oracle", c4_bayesian_oracle),
        ("weighted-average oracle", c5_eq1_oracle),
        ("imputation recovery", c6_recovery),
        ("regression correctness", c7_regression),
        ("pagerank unanimity", c8_pagerank),
        ("statistical test oracles", c9_stats),
        ("end-to-end determinism", c10_end_to_end),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let out = check();
        failed += usize::from(!out.pass);
        println!("criterion {:>2} {} {name}: {}", i + 1, if out.pass { "PASS" } else { "FAIL" }, out.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
