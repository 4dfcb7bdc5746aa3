//! End-to-end acceptance criteria. Each test prints one PASS/FAIL line with
//! its runtime and budget. Tests share one lock so runtimes are not inflated
//! by each other.

use std::io::Write;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use treedet::examples::{self, bern75, ALPHA, EPSILON};
use treedet_core::channels::TransmissionFunction;
use treedet_core::evaluate::{
    chebyshev_variance_check, evaluate_exact, evaluate_point, fit_points, monte_carlo_error, ExactOptions, Recipe,
    Regressor,
};
use treedet_core::rates::{chernoff_bound_report, BoundKind, RateTable, ThresholdVector};
use treedet_core::strategy::{build_relay_strategy, np_calibrate_root, simple_strategy, RelayRule, Strategy};
use treedet_core::topology::{two_level, uniformize, SizeRule, Tree, TreeFamily};
use treedet_core::{Alphabet, DistributionPair, Hypothesis};

static LOCK: Mutex<()> = Mutex::new(());

fn criterion(id: u32, name: &str, budget_secs: f64, body: impl FnOnce() -> Result<String, String>) {
    let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let outcome = body();
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs <= budget_secs;
    let (verdict, detail) = match (&outcome, in_time) {
        (Ok(d), true) => ("PASS", d.clone()),
        (Ok(d), false) => ("FAIL", format!("{d}; over budget")),
        (Err(d), _) => ("FAIL", d.clone()),
    };
    // Written to the real stdout so the line shows without --nocapture.
    let line = format!("{verdict} [{id:>2}] {name} ({secs:.2} s, budget {budget_secs} s): {detail}\n");
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(verdict == "PASS", "{}", line.trim_end());
}

// ---- independent oracles ----

/// `0.5 ln 3`, the divergence of the 0.25/0.75 Bernoulli pair.
fn d_bern75() -> f64 {
    0.5 * 3f64.ln()
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
}

/// `ln C(n, k)` by summing logs.
fn ln_choose(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln()).sum()
}

fn ln_binom_pmf(n: usize, k: usize, p: f64) -> f64 {
    ln_choose(n, k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

fn ln_sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.into_iter().collect();
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Neyman-Pearson test on `n` Bernoulli(0.25 vs 0.75) samples with a
/// deterministic count threshold: `ln P1(K <= c)` for the smallest `c` with
/// `P0(K > c) <= alpha`.
fn ln_beta_np(n: usize, alpha: f64) -> f64 {
    let mut lf = vec![0.0f64; n + 1];
    for i in 1..=n {
        lf[i] = lf[i - 1] + (i as f64).ln();
    }
    let pmf = |k: usize, p: f64| lf[n] - lf[k] - lf[n - k] + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln();
    let mut tail0 = vec![f64::NEG_INFINITY; n + 2];
    for k in (0..=n).rev() {
        tail0[k] = ln_sum([tail0[k + 1], pmf(k, 0.25)]);
    }
    let c = (0..=n).find(|&c| tail0[c + 1] <= alpha.ln()).expect("c = n always qualifies");
    ln_sum((0..=c).map(|k| pmf(k, 0.75)))
}

/// Maximum of a concave function on `[a, b]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if fc < fd {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        }
    }
    f(0.5 * (a + b)).max(fc).max(fd).max(f(a)).max(f(b))
}

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    (slope, 1.0 - sse / syy)
}

fn random_pair(rng: &mut ChaCha8Rng, size: usize) -> DistributionPair {
    let mut draw = || {
        let w: Vec<f64> = (0..size).map(|_| rng.random_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let (mut p0, mut p1) = (draw(), draw());
    // Exact normalization for the 1e-12 sum check.
    let fix = |v: &mut Vec<f64>| {
        let rest: f64 = v[1..].iter().sum();
        v[0] = 1.0 - rest;
    };
    fix(&mut p0);
    fix(&mut p1);
    DistributionPair::new(Alphabet::numbered(size).unwrap(), p0, p1).unwrap()
}

/// A leaf map onto `{0,1}` that uses both outputs.
fn random_binary_map(rng: &mut ChaCha8Rng, size: usize) -> TransmissionFunction {
    loop {
        let table: Vec<usize> = (0..size).map(|_| rng.random_range(0..2)).collect();
        if table.contains(&0) && table.contains(&1) {
            return TransmissionFunction::new(0, vec![Alphabet::numbered(size).unwrap()], Alphabet::binary(), table)
                .unwrap();
        }
    }
}

fn induced(pair: &DistributionPair, g: &TransmissionFunction) -> (Vec<f64>, Vec<f64>) {
    let mut q = (vec![0.0; 2], vec![0.0; 2]);
    for (x, &y) in g.table().iter().enumerate() {
        q.0[y] += pair.p0()[x];
        q.1[y] += pair.p1()[x];
    }
    q
}

/// Top-down h-uniform tree; depth-`d` nodes pick fan-outs from `menus[d]`.
fn layered_tree(menus: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Tree {
    let mut parents = vec![None];
    let mut frontier = vec![0usize];
    for menu in menus {
        let mut next = Vec::new();
        for &v in &frontier {
            let k = menu[rng.random_range(0..menu.len())];
            for _ in 0..k {
                parents.push(Some(v));
                next.push(parents.len() - 1);
            }
        }
        frontier = next;
    }
    Tree::from_parents(parents).unwrap()
}

/// Subtree leaf counts and predecessor counts from a parent vector.
fn subtree_counts(parents: &[Option<usize>]) -> (Vec<usize>, Vec<usize>) {
    let n = parents.len();
    let mut kids = vec![Vec::new(); n];
    for (v, p) in parents.iter().enumerate() {
        if let Some(p) = p {
            kids[*p].push(v);
        }
    }
    let mut order = vec![0usize];
    let mut i = 0;
    while i < order.len() {
        order.extend_from_slice(&kids[order[i]]);
        i += 1;
    }
    let mut leaves = vec![0usize; n];
    let mut nodes = vec![1usize; n];
    for &v in order.iter().rev() {
        if kids[v].is_empty() {
            leaves[v] = 1;
        }
        if let Some(p) = parents[v] {
            leaves[p] += leaves[v];
            nodes[p] += nodes[v];
        }
    }
    (leaves, nodes.into_iter().map(|x| x - 1).collect())
}

// ---- criteria ----

#[test]
fn c01_parallel_baseline() {
    criterion(1, "parallel baseline", 1.0, || {
        let pair = bern75();
        let id = TransmissionFunction::identity(pair.alphabet().clone());
        let recipe = Recipe::Relay { gamma: id, thresholds: ThresholdVector(vec![0.0]) };
        let sizes = [250usize, 500, 1000, 2000];
        let mut points = Vec::new();
        for &l in &sizes {
            let p = evaluate_point(&TreeFamily::Parallel.generate(l + 1).unwrap(), l + 1, &recipe, &pair, ALPHA, Regressor::Leaves)
                .map_err(|e| e.to_string())?;
            let oracle = ln_beta_np(l, ALPHA);
            if (p.ln_type_ii - oracle).abs() > 1e-9 * oracle.abs() {
                return Err(format!("l = {l}: ln beta {} vs binomial oracle {oracle}", p.ln_type_ii));
            }
            points.push(p);
        }
        let last = points.last().unwrap().normalized;
        let fit = fit_points(points, Regressor::Leaves).map_err(|e| e.to_string())?;
        let gap = (last + d_bern75()).abs();
        let detail = format!("(1/l) ln beta at l=2000 = {last:.6}, slope {:.6}, R^2 {:.7}", fit.fit.slope, fit.fit.r2);
        if gap <= 0.05 && fit.fit.r2 >= 0.999 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c02_rate_identity() {
    criterion(2, "rate identity and transform cross-check", 10.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (mut worst_id, mut worst_cf, mut done) = (0.0f64, 0.0f64, 0);
        while done < 200 {
            let size = rng.random_range(2..=4);
            let pair = random_pair(&mut rng, size);
            let g = random_binary_map(&mut rng, size);
            let (q0, q1) = induced(&pair, &g);
            let (d01, d10) = (kl(&q0, &q1), kl(&q1, &q0));
            if d01 < 1e-3 {
                continue;
            }
            let h = rng.random_range(1..=4);
            // Level-1 rates by an independent transform of the log-MGFs.
            let mgf0 = |l: f64| (q0[0].powf(1.0 - l) * q1[0].powf(l) + q0[1].powf(1.0 - l) * q1[1].powf(l)).ln();
            let mgf1 = |l: f64| (q0[0].powf(-l) * q1[0].powf(1.0 + l) + q0[1].powf(-l) * q1[1].powf(1.0 + l)).ln();
            let mut ts = Vec::new();
            let mut oracle: Vec<(f64, f64)> = Vec::new();
            for k in 1..=h {
                let (lo, hi) = if k == 1 { (-d01, d10) } else { (-oracle[k - 2].1, oracle[k - 2].0) };
                let t = lo + (hi - lo) * rng.random_range(0.1..0.9);
                let rates = if k == 1 {
                    (golden_max(|l| l * t - mgf0(l), 0.0, 1.0), golden_max(|l| l * t - mgf1(l), -1.0, 0.0))
                } else {
                    let (r0, r1) = oracle[k - 2];
                    // Closed forms; the numeric transform is checked below.
                    (r0 * (r1 + t) / (r0 + r1), r1 * (r0 - t) / (r0 + r1))
                };
                ts.push(t);
                oracle.push(rates);
            }
            let table = RateTable::new(&pair, &g, &ThresholdVector(ts.clone())).map_err(|e| e.to_string())?;
            for k in 1..=h {
                let (r0, r1) = (table.rate(Hypothesis::H0, k), table.rate(Hypothesis::H1, k));
                worst_id = worst_id.max((r1 - (r0 - ts[k - 1])).abs());
                worst_cf = worst_cf.max((r0 - oracle[k - 1].0).abs()).max((r1 - oracle[k - 1].1).abs());
                if k >= 2 {
                    let (a0, a1) = (table.rate(Hypothesis::H0, k - 1), table.rate(Hypothesis::H1, k - 1));
                    let t = ts[k - 1];
                    let env0 = |l: f64| (-a1 * l).max(a0 * (l - 1.0));
                    let env1 = |l: f64| (-a1 * (1.0 + l)).max(a0 * l);
                    let n0 = golden_max(|l| l * t - env0(l), 0.0, 1.0);
                    let n1 = golden_max(|l| l * t - env1(l), -1.0, 0.0);
                    worst_cf = worst_cf.max((r0 - n0).abs()).max((r1 - n1).abs());
                }
            }
            done += 1;
        }
        let detail = format!("200 tables, identity deviation {worst_id:.1e}, closed form vs numeric {worst_cf:.1e}");
        if worst_id <= 1e-10 && worst_cf <= 1e-8 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c03_chernoff_bounds() {
    criterion(3, "per-node and root error bounds", 60.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut done = 0;
        let mut worst = f64::NEG_INFINITY;
        let mut total_leaves = 0usize;
        while done < 50 {
            let h = rng.random_range(1..=3);
            let mut menus: Vec<Vec<usize>> = Vec::new();
            for d in 0..h {
                let (lo, hi) = if d + 1 == h { (2, 400) } else { (1, 6) };
                let a = rng.random_range(lo..=hi);
                let b = rng.random_range(lo..=hi);
                menus.push(vec![a, b]);
            }
            let tree = layered_tree(&menus, &mut rng);
            if tree.num_leaves() > 10_000 {
                continue;
            }
            let size = rng.random_range(2..=3);
            let pair = random_pair(&mut rng, size);
            let g = random_binary_map(&mut rng, size);
            let (q0, q1) = induced(&pair, &g);
            let d = kl(&q0, &q1);
            if d < 1e-2 {
                continue;
            }
            let eps = d * rng.random_range(0.02..0.98);
            let t = -d + eps / 2.0;
            let th = ThresholdVector::uniform(t, h);
            let table = RateTable::new(&pair, &g, &th).map_err(|e| e.to_string())?;
            let s = build_relay_strategy(&tree, &pair, &g, &th).map_err(|e| e.to_string())?;
            let ev = evaluate_exact(&tree, &s, &pair, &ExactOptions::default()).map_err(|e| e.to_string())?;
            let (leaf_counts, preds) = subtree_counts(tree.parents());
            let floor = tree.set_b().iter().map(|&v| leaf_counts[v]).min().unwrap();
            let report = chernoff_bound_report(&tree, &table, floor).map_err(|e| e.to_string())?;
            if !report.root_bounds_emitted {
                return Err("root bounds missing".into());
            }
            for row in &report.rows {
                let (l, k) = (leaf_counts[row.node] as f64, row.level);
                let (rate, ln_p) = match row.kind {
                    BoundKind::TypeIINode | BoundKind::TypeIIRoot => {
                        (table.rate(Hypothesis::H1, k), ev.node_tail(row.node).unwrap().ln_p1_low)
                    }
                    BoundKind::TypeINode | BoundKind::TypeIRoot => {
                        (table.rate(Hypothesis::H0, k), ev.node_tail(row.node).unwrap().ln_p0_high)
                    }
                };
                let bound = match row.kind {
                    BoundKind::TypeIINode | BoundKind::TypeINode => -rate + preds[row.node] as f64 / l - 1.0,
                    _ => -rate + h as f64 / floor as f64,
                };
                if (bound - row.value).abs() > 1e-12 {
                    return Err(format!("node {}: reported bound {} vs {bound}", row.node, row.value));
                }
                let slack = bound - ln_p / l;
                worst = worst.max(-slack);
                if slack < -1e-9 {
                    return Err(format!("node {} {:?}: (1/l) ln P = {} above bound {bound}", row.node, row.kind, ln_p / l));
                }
            }
            total_leaves += tree.num_leaves();
            done += 1;
        }
        Ok(format!("50 trees ({total_leaves} leaves in total), smallest slack {:.3e}", -worst))
    });
}

#[test]
fn c04_two_relay() {
    criterion(4, "two-relay family reaches the parallel exponent", 5.0, || {
        let fit = examples::two_relay_fit(&bern75(), &examples::TWO_RELAY_GRID).map_err(|e| e.to_string())?;
        if fit.points.iter().any(|p| p.type_i > ALPHA) {
            return Err("a grid point is not admissible".into());
        }
        let xs: Vec<f64> = fit.points.iter().map(|p| p.leaves as f64).collect();
        let ys: Vec<f64> = fit.points.iter().map(|p| p.ln_type_ii).collect();
        let (slope, _) = least_squares_slope(&xs, &ys);
        let detail = format!("slope {slope:.6} vs {:.6} on m = 2^14..2^17", -d_bern75());
        if (slope + d_bern75()).abs() <= 0.05 && (slope - fit.fit.slope).abs() < 1e-9 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c05_gate_comparison() {
    criterion(5, "gate comparison table", 5.0, || {
        let pair = bern75();
        let (g, rows) = examples::gate_table(&pair).map_err(|e| e.to_string())?;
        let leaf = [0.75, 0.25];
        let leaf1 = [0.25, 0.75];
        let forward = -kl(&leaf, &leaf1) / 2.0;
        let or = -kl(&[0.75 * 0.75, 1.0 - 0.75 * 0.75], &[0.25 * 0.25, 1.0 - 0.25 * 0.25]) / 2.0;
        let and = -kl(&[1.0 - 0.25 * 0.25, 0.25 * 0.25], &[1.0 - 0.75 * 0.75, 0.75 * 0.75]) / 2.0;
        for (name, oracle) in [("forward", forward), ("or", or), ("and", and)] {
            let row = rows.iter().find(|r| r.gate == name).unwrap();
            if (row.per_leaf_exponent - oracle).abs() > 1e-6 {
                return Err(format!("{name}: {} vs {oracle}", row.per_leaf_exponent));
            }
            if !(row.per_leaf_exponent > g) {
                return Err(format!("{name} is not inferior to {g}"));
            }
        }
        let (k, best) = examples::k2(&pair).map_err(|e| e.to_string())?;
        let fit = examples::gate_fit(&pair, &best, &examples::GATE_GRID).map_err(|e| e.to_string())?;
        let detail = format!("forward {forward:.6}, OR {or:.6}, AND {and:.6}; best-gate slope {:.6} vs {k:.6}", fit.fit.slope);
        if (fit.fit.slope - or).abs() <= 0.05 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c06_increasing_leaves() {
    criterion(6, "increasing-leaves family", 10.0, || {
        let z = examples::increasing_q().map_err(|e| e.to_string())?;
        for (c, q) in &z.q_curves {
            for (m, v) in z.sizes.iter().zip(q) {
                let small: usize = (1..=*m).map(|i| i + 1).filter(|l| l <= c).sum();
                let oracle = small as f64 / (m * (m + 3) / 2) as f64;
                if (v - oracle).abs() > 1e-15 {
                    return Err(format!("q_{c} at m = {m}: {v} vs {oracle}"));
                }
            }
        }
        let q_ok = examples::q_vanishes(&z, examples::INCREASING_Q_LIMIT);
        let fit = examples::increasing_fit(&bern75(), &examples::INCREASING_GRID).map_err(|e| e.to_string())?;
        let finals: Vec<String> = z.q_curves.iter().map(|(c, q)| format!("q_{c} = {:.2e}", q.last().unwrap())).collect();
        let detail = format!(
            "{} at m = 200; slope {:.4} vs {:.4} on m = {:?}",
            finals.join(", "),
            fit.fit.slope,
            -d_bern75(),
            examples::INCREASING_GRID
        );
        if q_ok && (fit.fit.slope + d_bern75()).abs() <= 0.05 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c07_naive_fusion() {
    criterion(7, "all-zero fusion is inadmissible, simple strategy is not", 5.0, || {
        let pair = bern75();
        let m = examples::NAIVE_LEAVES;
        // A relay sends 1 iff (2k - m) ln 3 / m > -D + eps, k = ones seen.
        let t = -d_bern75() + EPSILON;
        let ln_p0_zero =
            ln_sum((0..=m).filter(|&k| !((2.0 * k as f64 - m as f64) * 3f64.ln() / m as f64 > t)).map(|k| ln_binom_pmf(m, k, 0.25)));
        let mut report = Vec::new();
        for n in [1e5, 1e6, (m as f64).powi(m as i32)] {
            let e = examples::naive_rule(&pair, m, n).map_err(|e| e.to_string())?;
            let oracle = -(n * ln_p0_zero).exp_m1();
            if (e.type_i - oracle).abs() > 1e-12 || !(e.type_i > ALPHA) {
                return Err(format!("{n:e} relays: naive Type I {} (oracle {oracle})", e.type_i));
            }
            report.push(format!("N={n:.0e}: naive {:.4}", e.type_i));
        }
        // Exact evaluation of the full 1e5-relay tree agrees with the closed form.
        let relays = 100_000;
        let tree = two_level(&vec![m; relays]).unwrap();
        let id = TransmissionFunction::identity(pair.alphabet().clone());
        let naive = Strategy::new(id, vec![RelayRule::Llrq { threshold: t }], 0.0);
        let ev = evaluate_exact(&tree, &naive, &pair, &ExactOptions::default()).map_err(|e| e.to_string())?;
        let lowest = ev.root_law().atoms()[0].value / tree.num_leaves() as f64;
        let full = ev.errors_at(lowest);
        let closed = examples::naive_rule(&pair, m, relays as f64).map_err(|e| e.to_string())?;
        if (full.type_i - closed.type_i).abs() > 1e-9 || (full.ln_type_ii - closed.ln_type_ii).abs() > 1e-6 * closed.ln_type_ii.abs() {
            return Err(format!("full tree {:?} vs closed form {:?}", full, closed));
        }
        let leaves = examples::all_binary_leaves(&pair).map_err(|e| e.to_string())?;
        let s = simple_strategy(&tree, &pair, &leaves, EPSILON).map_err(|e| e.to_string())?;
        let cal = np_calibrate_root(&s.tree, &s.strategy, &pair, ALPHA).map_err(|e| e.to_string())?;
        for n in examples::SIMPLE_RELAYS {
            let c = examples::simple_many_relays(&pair, m, n).map_err(|e| e.to_string())?;
            if !(c.type_i <= ALPHA) {
                return Err(format!("{n} relays: simple strategy Type I {}", c.type_i));
            }
            if n == relays && (c.ln_type_ii - cal.ln_type_ii).abs() > 1e-6 * cal.ln_type_ii.abs() {
                return Err(format!("simple strategy: {} vs full tree {}", c.ln_type_ii, cal.ln_type_ii));
            }
            report.push(format!("N={n:.0e}: simple {:.4}", c.type_i));
        }
        Ok(report.join(", "))
    });
}

#[test]
fn c08_uniformization() {
    criterion(8, "uniformization invariants", 5.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..100 {
            let max_h = rng.random_range(1..=4);
            let n = rng.random_range(2..=300);
            let mut parents = vec![None];
            let mut depth = vec![0usize];
            for v in 1..n {
                let p = loop {
                    let p = rng.random_range(0..v);
                    if depth[p] < max_h {
                        break p;
                    }
                };
                parents.push(Some(p));
                depth.push(depth[p] + 1);
            }
            let tree = Tree::from_parents(parents.clone()).unwrap();
            let u = uniformize(&tree).tree;
            let (l0, _) = subtree_counts(&parents);
            let (l1, _) = subtree_counts(u.parents());
            let h = tree.height();
            if l0[0] != l1[0] || !u.is_uniform() || u.height() != h {
                return Err(format!("tree {trial}: leaves {} -> {}, uniform {}", l0[0], l1[0], u.is_uniform()));
            }
            // B: non-leaf nodes all of whose children are leaves.
            let b_set = |ps: &[Option<usize>], leaves: &[usize]| -> Vec<usize> {
                let n = ps.len();
                let mut kids = vec![Vec::new(); n];
                for (v, p) in ps.iter().enumerate() {
                    if let Some(p) = p {
                        kids[*p].push(v);
                    }
                }
                (0..n)
                    .filter(|&v| !kids[v].is_empty() && kids[v].iter().all(|c| kids[*c].is_empty()))
                    .map(|v| leaves[v])
                    .collect()
            };
            let (b0, b1) = (b_set(&parents, &l0), b_set(u.parents(), &l1));
            if b1.len() > h * b0.len() {
                return Err(format!("tree {trial}: |B'| = {} > {h} * {}", b1.len(), b0.len()));
            }
            let q = |b: &[usize], c: usize, total: usize| b.iter().filter(|&&l| l <= c).sum::<usize>() as f64 / total as f64;
            for nn in [2usize, 5, 10] {
                for mm in [2usize, 5, 10] {
                    let lhs = q(&b1, nn, l1[0]);
                    let rhs = h as f64 * (nn as f64 * q(&b0, mm, l0[0]) + nn as f64 / mm as f64);
                    if lhs > rhs + 1e-12 {
                        return Err(format!("tree {trial}: q'_{nn} = {lhs} > {rhs} (M = {mm})"));
                    }
                }
            }
        }
        Ok("100 trees".into())
    });
}

#[test]
fn c09_fusion_loss() {
    criterion(9, "fusion-loss constant over the 16 gates", 1.0, || {
        let (k, _) = examples::k2(&bern75()).map_err(|e| e.to_string())?;
        let or = -kl(&[0.5625, 0.4375], &[0.0625, 0.9375]) / 2.0;
        let detail = format!("K_2 = {k:.9} (OR oracle {or:.9}), g_P* = {:.6}", -d_bern75());
        if (k - or).abs() <= 1e-9 && (k - (-0.451251)).abs() < 1e-6 && k > -d_bern75() {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}

#[test]
fn c10_chebyshev() {
    criterion(10, "concentration of the root sum", 5.0, || {
        let pair = bern75();
        let id = TransmissionFunction::identity(pair.alphabet().clone());
        let s = Strategy::new(id, vec![RelayRule::Gate(TransmissionFunction::or_gate(2))], 0.0);
        let fam = TreeFamily::WideUniform { leaves: SizeRule::Fixed(2), relays: SizeRule::Linear };
        let a = 3f64.ln().powi(2) + 2.0;
        // OR of two leaves: P0(0) = 9/16, P1(0) = 1/16.
        let (lo, hi) = ((1.0f64 / 9.0).ln(), (0.9375f64 / 0.4375).ln());
        let mut prev = f64::INFINITY;
        let mut parts = Vec::new();
        for m in [50usize, 100, 200] {
            let c = chebyshev_variance_check(&fam.generate(m).unwrap(), &s, &pair, 2, 0.3).map_err(|e| e.to_string())?;
            let l = 2.0 * m as f64;
            let mean = m as f64 * (0.5625 * lo + 0.4375 * hi) / l;
            let lhs: f64 = (0..=m)
                .filter(|&k| ((k as f64 * hi + (m - k) as f64 * lo) / l - mean).abs() > 0.3)
                .map(|k| ln_binom_pmf(m, k, 0.4375).exp())
                .sum();
            let rhs = a * 3.0 / (0.09 * l);
            if (c.lhs - lhs).abs() > 1e-12 || (c.rhs - rhs).abs() > 1e-12 || (c.lambda_n - mean).abs() > 1e-12 {
                return Err(format!("l = {l}: {c:?} vs oracle lhs {lhs}, rhs {rhs}"));
            }
            if !(lhs <= rhs && lhs < prev) {
                return Err(format!("l = {l}: lhs {lhs}, rhs {rhs}, previous {prev}"));
            }
            prev = lhs;
            parts.push(format!("l={l}: {lhs:.3e} <= {rhs:.3}"));
        }
        Ok(parts.join(", "))
    });
}

#[test]
fn c11_monte_carlo() {
    criterion(11, "Monte Carlo agrees with exact evaluation", 60.0, || {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let trials = 100_000u64;
        let (mut agree, mut done) = (0, 0);
        let mut first = None;
        while done < 50 {
            let h = rng.random_range(1..=3);
            let menus: Vec<Vec<usize>> = (0..h)
                .map(|d| {
                    let (lo, hi) = if d + 1 == h { (2, 12) } else { (2, 3) };
                    vec![rng.random_range(lo..=hi), rng.random_range(lo..=hi)]
                })
                .collect();
            let tree = layered_tree(&menus, &mut rng);
            if tree.num_leaves() > 40 {
                continue;
            }
            let size = rng.random_range(2..=3);
            let pair = random_pair(&mut rng, size);
            let g = random_binary_map(&mut rng, size);
            let (q0, q1) = induced(&pair, &g);
            let d = kl(&q0, &q1);
            if d < 1e-2 {
                continue;
            }
            let th = ThresholdVector::uniform(-d + d * rng.random_range(0.05..0.95), h);
            let s = build_relay_strategy(&tree, &pair, &g, &th).map_err(|e| e.to_string())?;
            let s = np_calibrate_root(&tree, &s, &pair, ALPHA).map_err(|e| e.to_string())?.strategy;
            let exact = evaluate_exact(&tree, &s, &pair, &ExactOptions::default()).map_err(|e| e.to_string())?.errors();
            let seed = rng.random::<u64>();
            let mc = treedet::parallel::monte_carlo(&tree, &s, &pair, trials, seed).map_err(|e| e.to_string())?;
            let within = |p: f64, est: f64| {
                let se = (p * (1.0 - p) / trials as f64).sqrt();
                (est - p).abs() <= 4.0 * se
            };
            if within(exact.type_i, mc.type_i) && within(exact.type_ii, mc.type_ii) {
                agree += 1;
            }
            if first.is_none() {
                first = Some((tree, s, pair, seed, mc));
            }
            done += 1;
        }
        let (tree, s, pair, seed, mc) = first.unwrap();
        let again = treedet::parallel::monte_carlo(&tree, &s, &pair, trials, seed).map_err(|e| e.to_string())?;
        let sequential = monte_carlo_error(&tree, &s, &pair, trials, seed).map_err(|e| e.to_string())?;
        let bytes = |e: &treedet_core::evaluate::ErrorEstimate| format!("{e:?}");
        if bytes(&again) != bytes(&mc) || bytes(&sequential) != bytes(&mc) {
            return Err("identical seeds gave different estimates".into());
        }
        let detail = format!("{agree}/50 configurations within 4 standard errors; reruns identical");
        if agree >= 48 {
            Ok(detail)
        } else {
            Err(detail)
        }
    });
}
