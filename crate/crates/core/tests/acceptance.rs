//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use causumx_core::dag::parse_dot;
use causumx_core::effect::{estimate_cate, regress_effect, assign_treatment, EffectConfig};
use causumx_core::groupmine::mine_grouping_patterns;
use causumx_core::lpsolve::{randomized_rounding, solve_ilp_exact, solve_lp_relaxation, IlpInstance};
use causumx_core::oracle::{brute_force_summarize, kendall_tau, naive_frequent_patterns, precision_recall};
use causumx_core::synthgen::{generate_synthetic, synthetic_dag, synthetic_grouping_attrs};
use causumx_core::tabular::{evaluate_query, Column};
use causumx_core::{
    explain, render_json, render_text, CausalDag, Dataset, Literal, Op, Pattern, QuerySpec, Settings, SimplePredicate,
    SummaryReport,
};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn synthetic_query() -> QuerySpec {
    QuerySpec::new(vec!["G".into()], "O")
}

fn synthetic_settings(i: usize) -> Settings {
    Settings {
        grouping_attrs: Some(synthetic_grouping_attrs(i)),
        ..Settings::default()
    }
}

/// Rows of the view satisfying `p`.
fn rows_matching(d: &Dataset, rows: &[usize], p: &Pattern) -> BTreeSet<usize> {
    p.compile(d).unwrap().filter(rows).into_iter().collect()
}

fn ground_truth_value(pred: &SimplePredicate, positive: bool) -> bool {
    let q: usize = pred.attr.trim_start_matches("T_").parse().unwrap();
    let want = if (q % 2 == 1) == positive { "5" } else { "1" };
    pred.op == Op::Eq && pred.value == Literal::Text(want.into())
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (n, i, j) = (1000, 3, 3);
    let d = generate_synthetic(n, i, j, 11).unwrap();
    let report = explain(&d, &synthetic_dag(i, j), &synthetic_query(), &synthetic_settings(i)).unwrap();
    let elapsed = start.elapsed();
    let mut bad = Vec::new();
    let mut checked = 0;
    for c in &report.candidates {
        for (node, positive) in [(&c.pos, true), (&c.neg, false)] {
            if let Some(node) = node {
                checked += 1;
                if !node.pattern.predicates().iter().all(|p| ground_truth_value(p, positive)) {
                    bad.push(format!("{} -> {}", c.pg, node.pattern));
                }
            }
        }
    }
    check(
        bad.is_empty() && checked > 0 && elapsed < Duration::from_secs(30),
        format!(
            "{checked} treatments over {} grouping patterns, {} wrong {:?}, {:.2?}",
            report.candidates.len(),
            bad.len(),
            bad,
            elapsed
        ),
    )
}

fn covered_rows(d: &Dataset, r: &SummaryReport) -> BTreeSet<usize> {
    r.selected
        .iter()
        .flat_map(|c| rows_matching(d, &r.view.rows, &c.pg))
        .collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let (n, i, j) = (1000, 2, 3);
    let mut group_p = Vec::new();
    let mut group_r = Vec::new();
    let mut treat_p = Vec::new();
    let mut treat_r = Vec::new();
    for seed in 0..10 {
        let d = generate_synthetic(n, i, j, 100 + seed).unwrap();
        let dag = synthetic_dag(i, j);
        let settings = Settings {
            seed,
            ..synthetic_settings(i)
        };
        let ours = explain(&d, &dag, &synthetic_query(), &settings).unwrap();
        let truth = brute_force_summarize(&d, &dag, &synthetic_query(), &settings).unwrap();
        let (p, r) = precision_recall(&covered_rows(&d, &ours), &covered_rows(&d, &truth));
        group_p.push(p);
        group_r.push(r);

        for c in &ours.candidates {
            let Some(t) = truth.candidates.iter().find(|t| t.pg == c.pg) else { continue };
            let sub: Vec<usize> = rows_matching(&d, &ours.view.rows, &c.pg).into_iter().collect();
            for (a, b) in [(&c.pos, &t.pos), (&c.neg, &t.neg)] {
                if let (Some(a), Some(b)) = (a, b) {
                    let (p, r) = precision_recall(
                        &rows_matching(&d, &sub, &a.pattern),
                        &rows_matching(&d, &sub, &b.pattern),
                    );
                    treat_p.push(p);
                    treat_r.push(r);
                }
            }
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
    let (gp, gr, tp, tr) = (mean(&group_p), mean(&group_r), mean(&treat_p), mean(&treat_r));
    let elapsed = start.elapsed();
    check(
        gp >= 0.78 && gr >= 0.78 && tp >= 0.75 && tr >= 0.9 && !treat_p.is_empty() && elapsed < Duration::from_secs(300),
        format!(
            "grouping P={gp:.3} R={gr:.3}; treatment P={tp:.3} R={tr:.3} over {} pairs; {elapsed:.2?}",
            treat_p.len()
        ),
    )
}

fn criterion_3() -> Outcome {
    let d = generate_synthetic(10_000, 0, 2, 5).unwrap();
    let view = evaluate_query(&d, &synthetic_query()).unwrap();
    let dag = synthetic_dag(0, 2);
    let cfg = EffectConfig::default();
    let single = Pattern::parse("T_1 = 5", &d).unwrap();
    let pair = Pattern::parse("T_1 = 5 AND T_2 = 1", &d).unwrap();
    let a = estimate_cate(&d, &view, &Pattern::empty(), &single, &dag, cfg).unwrap().unwrap();
    let b = estimate_cate(&d, &view, &Pattern::empty(), &pair, &dag, cfg).unwrap().unwrap();
    let closed = 4.0 + 1.0 / 6.0;
    check(
        (a.cate - 2.5).abs() <= 0.15 && (b.cate - closed).abs() <= 3.0 * b.std_error,
        format!(
            "T_1=5: {:.4} (want 2.5 +- 0.15); T_1=5,T_2=1: {:.4} (want {closed:.4} +- {:.4})",
            a.cate,
            b.cate,
            3.0 * b.std_error
        ),
    )
}

fn criterion_4() -> Outcome {
    let n = 5000;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let (mut z, mut t, mut y) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..n {
        let zi = rng.gen_bool(0.5);
        let ti = rng.gen_bool(if zi { 0.8 } else { 0.2 });
        z.push(Some(if zi { "1" } else { "0" }));
        t.push(Some(if ti { "1" } else { "0" }));
        y.push(Some(2.0 * ti as u8 as f64 + 3.0 * zi as u8 as f64 + noise.sample(&mut rng)));
    }
    let d = Dataset::new(vec![
        ("g".into(), Column::categorical(&vec![Some("all"); n])),
        ("Z".into(), Column::categorical(&z)),
        ("T".into(), Column::categorical(&t)),
        ("Y".into(), Column::numeric(y)),
    ])
    .unwrap();
    let view = evaluate_query(&d, &QuerySpec::new(vec!["g".into()], "Y")).unwrap();
    let dag = parse_dot("digraph { Z -> T; Z -> Y; T -> Y; }").unwrap();
    let pt = Pattern::parse("T = 1", &d).unwrap();
    let adjusted = estimate_cate(&d, &view, &Pattern::empty(), &pt, &dag, EffectConfig::default())
        .unwrap()
        .unwrap();
    let treated = assign_treatment(&d, &view.rows, &pt).unwrap();
    let naive = regress_effect(&d, &view.rows, &treated, "Y", &[], 10).unwrap().unwrap();
    check(
        (adjusted.cate - 2.0).abs() <= 3.0 * adjusted.std_error && (naive.cate - 2.0).abs() > 5.0 * naive.std_error,
        format!(
            "adjusted {:.4} (se {:.4}); unadjusted {:.4} (se {:.4})",
            adjusted.cate, adjusted.std_error, naive.cate, naive.std_error
        ),
    )
}

fn random_table(rng: &mut ChaCha8Rng) -> (Dataset, Vec<String>) {
    let attrs = rng.gen_range(1..=8);
    let rows = rng.gen_range(1..=200);
    let mut cols = Vec::new();
    let mut names = Vec::new();
    for a in 0..attrs {
        let card = rng.gen_range(1..=4);
        let cells: Vec<Option<String>> = (0..rows)
            .map(|_| {
                // the first attribute is the group-by key and is never missing
                if a > 0 && rng.gen_bool(0.05) {
                    None
                } else {
                    Some(format!("v{}", rng.gen_range(0..card)))
                }
            })
            .collect();
        names.push(format!("a{a}"));
        cols.push((format!("a{a}"), Column::categorical(&cells)));
    }
    let y: Vec<Option<f64>> = (0..rows).map(|_| Some(rng.gen_range(0.0..10.0))).collect();
    cols.push(("y".into(), Column::numeric(y)));
    (Dataset::new(cols).unwrap(), names)
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    let mut total = 0;
    for _ in 0..100 {
        let (d, attrs) = random_table(&mut rng);
        let tau = [0.0, rng.gen_range(0.0..1.0), 1.0][rng.gen_range(0..3)];
        let view = evaluate_query(&d, &QuerySpec::new(vec![attrs[0].clone()], "y")).unwrap();
        let mined = mine_grouping_patterns(&d, &view, &attrs, tau).unwrap();
        let naive = naive_frequent_patterns(&d, &attrs, tau).unwrap();
        total += naive.len();
        if mined != naive {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!("{mismatches} of 100 tables differ ({total} patterns total), {elapsed:.2?}"),
    )
}

fn random_ilp(rng: &mut ChaCha8Rng) -> IlpInstance {
    loop {
        let m = rng.gen_range(6..=20);
        let l = rng.gen_range(3..=8);
        let k = rng.gen_range(1..=3);
        let coverage: Vec<Vec<usize>> = (0..l)
            .map(|_| {
                let size = rng.gen_range(1..=m / 2);
                let mut c: Vec<usize> = (0..m).collect::<Vec<_>>().choose_multiple(rng, size).copied().collect();
                c.sort_unstable();
                c
            })
            .collect();
        let ilp = IlpInstance {
            weights: (0..l).map(|_| rng.gen_range(0.1..10.0)).collect(),
            coverage,
            m,
            k,
            theta: rng.gen_range(0.1..0.8),
        };
        if solve_ilp_exact(&ilp).unwrap().is_some() {
            return ilp;
        }
    }
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let trials = 10_000;
    let mut failures = Vec::new();
    for inst in 0..20 {
        let ilp = random_ilp(&mut rng);
        let opt = solve_ilp_exact(&ilp).unwrap().unwrap();
        let frac = solve_lp_relaxation(&ilp).unwrap().expect("feasible ILP has a feasible relaxation");
        if frac.objective < opt.weight - 1e-7 {
            failures.push(format!("#{inst}: LP {} < ILP {}", frac.objective, opt.weight));
        }
        let mut cov = Vec::with_capacity(trials);
        let mut wt = Vec::with_capacity(trials);
        let mut oversize = 0;
        for t in 0..trials {
            let picked = randomized_rounding(&frac, ilp.k, (inst as u64) << 32 | t as u64);
            if picked.len() > ilp.k {
                oversize += 1;
            }
            cov.push(ilp.covered_by(&picked) as f64);
            wt.push(ilp.weight_of(&picked));
        }
        let stats = |v: &[f64]| {
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (mean, (var / v.len() as f64).sqrt())
        };
        let (mc, sc) = stats(&cov);
        let (mw, sw) = stats(&wt);
        let cov_bound = (1.0 - (-1f64).exp()) * ilp.theta * ilp.m as f64;
        let wt_bound = opt.weight / ilp.k as f64;
        if mc < cov_bound - 3.0 * sc {
            failures.push(format!("#{inst}: coverage {mc:.3} < {cov_bound:.3}"));
        }
        if mw < wt_bound - 3.0 * sw {
            failures.push(format!("#{inst}: weight {mw:.3} < {wt_bound:.3}"));
        }
        if oversize > 0 {
            failures.push(format!("#{inst}: {oversize} oversize selections"));
        }
    }
    check(failures.is_empty(), format!("20 instances x {trials} trials; failures: {failures:?}"))
}

/// Effect of `T_q = v` conjunctions on the alternating sum, in closed form.
fn analytic_cate(preds: &[(usize, u8)]) -> f64 {
    let treated: f64 = preds
        .iter()
        .map(|&(q, v)| if q % 2 == 1 { v as f64 - 3.0 } else { 3.0 - v as f64 })
        .sum();
    let p = 0.2f64.powi(preds.len() as i32);
    treated / (1.0 - p)
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let (n, j) = (200_000, 4);
    let d = generate_synthetic(n, 0, j, 7).unwrap();
    let view = evaluate_query(&d, &synthetic_query()).unwrap();
    let dag = synthetic_dag(0, j);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut chosen: Vec<(Pattern, f64)> = Vec::new();
    while chosen.len() < 20 {
        let len = rng.gen_range(1..=2);
        let mut qs: Vec<usize> = (1..=j).collect::<Vec<_>>().choose_multiple(&mut rng, len).copied().collect();
        qs.sort_unstable();
        let preds: Vec<(usize, u8)> = qs.iter().map(|&q| (q, rng.gen_range(1..=5))).collect();
        let truth = analytic_cate(&preds);
        // weak effects are dominated by sampling noise at 20k rows
        if truth.abs() < 1.2 {
            continue;
        }
        let p = Pattern::new(
            preds
                .iter()
                .map(|&(q, v)| SimplePredicate::eq(format!("T_{q}"), v.to_string()))
                .collect(),
        )
        .unwrap();
        if chosen.iter().any(|(c, _)| *c == p) {
            continue;
        }
        chosen.push((p, truth));
    }
    let full_cfg = EffectConfig {
        sample_size: usize::MAX,
        ..EffectConfig::default()
    };
    let sampled_cfg = EffectConfig {
        sample_size: 20_000,
        ..EffectConfig::default()
    };
    let mut full = Vec::new();
    let mut sampled = Vec::new();
    let mut within = 0;
    for (p, _) in &chosen {
        let f = estimate_cate(&d, &view, &Pattern::empty(), p, &dag, full_cfg).unwrap().unwrap().cate;
        let s = estimate_cate(&d, &view, &Pattern::empty(), p, &dag, sampled_cfg).unwrap().unwrap().cate;
        if (s - f).abs() / f.abs() <= 0.10 {
            within += 1;
        }
        full.push(f);
        sampled.push(s);
    }
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        idx
    };
    let tau = kendall_tau(&rank(&sampled), &rank(&full)).unwrap();
    let elapsed = start.elapsed();
    check(
        within >= 18 && tau >= 0.9,
        format!("{within}/20 within 10%, Kendall tau {tau:.3}, {elapsed:.2?}"),
    )
}

fn criterion_8() -> Outcome {
    let (n, i, j) = (2000, 2, 3);
    let d = generate_synthetic(n, i, j, 8).unwrap();
    let dag = synthetic_dag(i, j);
    let run = |threads| {
        let s = Settings {
            threads,
            sample_size: 1500,
            seed: 42,
            ..synthetic_settings(i)
        };
        explain(&d, &dag, &synthetic_query(), &s).unwrap()
    };
    let one = run(1);
    let eight = run(8);
    let (a, b) = (render_json(&one), render_json(&eight));
    check(
        a == b && render_text(&one) == render_text(&eight),
        format!("{} bytes of JSON, {} explanations, identical={}", a.len(), one.selected.len(), a == b),
    )
}

fn criterion_9() -> Outcome {
    let (n, i, j) = (1000, 2, 2);
    let d = generate_synthetic(n, i, j, 9).unwrap();
    let dag: CausalDag = synthetic_dag(i, j);
    // no grouping pattern covers more than half of the groups
    let s = Settings {
        k: 1,
        theta: 1.0,
        ..synthetic_settings(i)
    };
    let ours = explain(&d, &dag, &synthetic_query(), &s).unwrap();
    let brute = brute_force_summarize(&d, &dag, &synthetic_query(), &s).unwrap();
    let text = render_text(&ours);
    check(
        ours.no_solution && brute.no_solution && text.trim() == "No feasible explanation summary.",
        format!(
            "causumx no_solution={}, bruteforce no_solution={}, text {:?}",
            ours.no_solution,
            brute.no_solution,
            text.trim()
        ),
    )
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let (n, i, j) = (100_000, 3, 6);
    let d = generate_synthetic(n, i, j, 10).unwrap();
    let report = explain(&d, &synthetic_dag(i, j), &synthetic_query(), &synthetic_settings(i)).unwrap();
    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(120),
        format!(
            "{} groups, {} candidates, {} selected, {elapsed:.2?}",
            report.view.m(),
            report.candidates.len(),
            report.selected.len()
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("synthetic ground-truth recovery", criterion_1),
        ("precision/recall vs brute force", criterion_2),
        ("CATE analytic check", criterion_3),
        ("confounder adjustment", criterion_4),
        ("Apriori oracle equivalence", criterion_5),
        ("rounding guarantees", criterion_6),
        ("sampling sensitivity", criterion_7),
        ("determinism across thread counts", criterion_8),
        ("feasibility semantics", criterion_9),
        ("scale smoke test", criterion_10),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let mut failed = 0;
    for (idx, (name, f)) in criteria.iter().enumerate() {
        let number = idx + 1;
        if only.is_some_and(|o| o != number) {
            continue;
        }
        match std::panic::catch_unwind(f) {
            Ok(Ok(detail)) => println!("criterion {number} ({name}): PASS - {detail}"),
            Ok(Err(detail)) => {
                failed += 1;
                println!("criterion {number} ({name}): FAIL - {detail}");
            }
            Err(_) => {
                failed += 1;
                println!("criterion {number} ({name}): FAIL - panicked");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
