//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::collections::HashMap;
use std::process::Command;
use std::time::{Duration, Instant};

use campus_epi::classes::{
    build_mean_matrix, cutoff_sweep, eigenvalues_2x2, max_safe_cutoff, reduced_two_block, spectral_radius,
    ClassSchedule,
};
use campus_epi::dorm::{
    critical_pd_double, gd_single, zeta_double, zeta_single, DoubleDormParams, SingleDormParams,
};
use campus_epi::pgf::{solve_pgf_recursion, FixedPointConfig, Pgf};
use campus_epi::sim::{ensemble, SimConfig, STEPS_PER_WEEK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, id: &str, ok: bool, detail: String) {
        println!("[{}] {id}: {detail}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            self.failures += 1;
        }
    }

    fn info(&self, id: &str, detail: String) {
        println!("[INFO] {id}: {detail}");
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn c1(r: &mut Report) {
    let (rho, t) = timed(|| spectral_radius(&build_mean_matrix(&ClassSchedule::scenario1())).unwrap());
    r.check(
        "C1 scenario 1 rho",
        within(rho, 87.0, 1e-6) && t < Duration::from_secs(1),
        format!("rho = {rho:.9} (target 87 +- 1e-6), {t:.2?}"),
    );
}

fn c2(r: &mut Report) {
    let schedule = ClassSchedule::scenario2();
    let ((block, rho), t) = timed(|| {
        let block = reduced_two_block(&schedule).unwrap();
        let rho = spectral_radius(&build_mean_matrix(&schedule)).unwrap();
        (block, rho)
    });
    let published = [[116.796, 19.388], [59.396, 37.783]];
    let entries_ok = (0..2).all(|i| (0..2).all(|j| within(block[i][j], published[i][j], 5e-4)));
    r.check(
        "C2a scenario 2 reduced block entries",
        entries_ok,
        format!(
            "computed [[{:.3}, {:.3}], [{:.3}, {:.3}]] vs published {published:?}",
            block[0][0], block[0][1], block[1][0], block[1][1]
        ),
    );
    let (big, small) = eigenvalues_2x2(&block);
    r.check(
        "C2b scenario 2 block eigenvalues",
        within(big, 129.380, 5e-4) && within(small, 25.288, 5e-4),
        format!("{big:.4} and {small:.4} (targets 129.380, 25.288 to 3 decimals)"),
    );
    r.check(
        "C2c scenario 2 full rho vs block",
        (rho - big).abs() < 1e-6 && t < Duration::from_secs(1),
        format!("full {rho:.9}, block {big:.9}, {t:.2?}"),
    );
}

fn c3(r: &mut Report) {
    let (rho, t) = timed(|| spectral_radius(&build_mean_matrix(&ClassSchedule::range_10_to_120())).unwrap());
    let r0 = 0.01 * rho;
    r.check(
        "C3 sizes 10..120 rho and R0",
        within(rho, 251.5, 0.05) && within(r0, 2.515, 5e-4) && t < Duration::from_secs(1),
        format!("rho = {rho:.4} (251.5 +- 0.05), R0(0.01) = {r0:.5} (2.515 +- 5e-4), {t:.2?}"),
    );
}

fn c4(r: &mut Report) {
    let schedule = ClassSchedule::range_10_to_120();
    let ps = [0.004, 0.008, 0.012];
    let ks: Vec<u32> = (9..=120).collect();
    let ((rows, safe), t) = timed(|| {
        let rows = cutoff_sweep(&schedule, &ps, &ks);
        let safe: Vec<u32> = ps
            .iter()
            .map(|&p| max_safe_cutoff(&schedule, p).unwrap())
            .collect();
        (rows, safe)
    });
    let monotone = ps.iter().all(|&p| {
        let r0: Vec<f64> = rows
            .iter()
            .filter(|row| row.p == p)
            .map(|row| *row.r0.as_ref().unwrap())
            .collect();
        r0.windows(2).all(|w| w[1] >= w[0] - 1e-12 * w[0].max(1.0))
    });
    r.check(
        "C4a R0(k) nondecreasing in k",
        monotone && t < Duration::from_secs(10),
        format!("p in {ps:?}, k = 9..=120, {t:.2?}"),
    );
    let in_range = safe.iter().all(|&k| (9..=120).contains(&k));
    let nonincreasing = safe.windows(2).all(|w| w[1] <= w[0]);
    r.check(
        "C4b max safe cutoffs in [9,120], nonincreasing in p",
        in_range && nonincreasing,
        format!("cutoffs {safe:?} for p = {ps:?}"),
    );
    r.check(
        "C4c max safe cutoffs match regression anchors",
        safe == [119, 85, 68] && max_safe_cutoff(&schedule, 0.01).unwrap() == 75,
        format!(
            "{safe:?} vs [119, 85, 68]; p = 0.01 -> {}",
            max_safe_cutoff(&schedule, 0.01).unwrap()
        ),
    );
    let mid = safe[1];
    r.check(
        "C4d mid-range p cutoff in 30..=70",
        (30..=70).contains(&mid),
        format!("p = {} -> k = {mid}", ps[1]),
    );
    let band: Vec<String> = [0.0115, 0.015, 0.02, 0.03, 0.034]
        .iter()
        .map(|&p| format!("p={p} -> k={}", max_safe_cutoff(&schedule, p).unwrap()))
        .collect();
    r.info("C4 band", band.join(", "));
}

fn c5(r: &mut Report) {
    let cfg = FixedPointConfig::default();
    let (gap, t) = timed(|| {
        let mut gap = 0.0f64;
        for lambda in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let params = SingleDormParams::from_rates(lambda, 0.0).unwrap();
            let iterated = solve_pgf_recursion(&Pgf::poisson(lambda).unwrap(), &cfg).unwrap();
            for (&z, &h) in iterated.grid().iter().zip(iterated.values()) {
                gap = gap.max((gd_single(z, &params).unwrap() - h).abs());
            }
        }
        gap
    });
    r.check(
        "C5 closed form vs iteration",
        gap < 1e-8 && t < Duration::from_secs(5),
        format!("sup gap {gap:.3e} on 1001 points, {t:.2?}"),
    );
}

/// Positive root of `1 - s = exp(-r s)`, or 0 when `r <= 1`.
fn poisson_survival(r: f64) -> f64 {
    if r <= 1.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-12, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - mid - (-r * mid).exp() > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c6(r: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (worst, t) = timed(|| {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let lambda = rng.gen_range(0.01..0.99);
            let global = rng.gen_range(0.0..3.0);
            let params = SingleDormParams::from_rates(lambda, global).unwrap();
            let zeta = zeta_single(&params).unwrap();
            worst = worst.max((zeta - poisson_survival(lambda + global)).abs());
        }
        worst
    });
    r.check(
        "C6 Poisson-survival identity",
        worst < 1e-6 && t < Duration::from_secs(10),
        format!("max gap {worst:.3e} over 100 sets, {t:.2?}"),
    );
}

fn c7(r: &mut Report) {
    let cfg = FixedPointConfig::default();
    let crit = critical_pd_double(0.7);
    let zeta_at =
        |local: f64| zeta_double(&DoubleDormParams::from_rates(local, 0.7, 0.0).unwrap(), &cfg).unwrap();
    let below = zeta_at(crit - 0.01);
    let above = zeta_at(crit + 0.01);
    r.check(
        "C7 double-room threshold",
        within(crit, 0.58824, 1e-5) && below == 0.0 && above > 0.0,
        format!("critical 2 n1 pD = {crit:.6}; zeta(Npg=0) = {below} below, {above:.5} above"),
    );
}

fn c8(r: &mut Report) {
    let cfg = FixedPointConfig::default();
    let globals: Vec<f64> = (0..=60).map(|i| i as f64 * 0.05).collect();
    let mut dominated = true;
    let mut strict_everywhere = true;
    let mut worst = f64::INFINITY;
    for local in [0.3, 0.5, 0.7, 0.9] {
        let mut strict = false;
        let mut supercritical = false;
        for &g in &globals {
            let single = zeta_single(&SingleDormParams::from_rates(local, g).unwrap()).unwrap();
            let double = zeta_double(&DoubleDormParams::from_rates(local, 0.7, g).unwrap(), &cfg).unwrap();
            worst = worst.min(double - single);
            dominated &= double >= single - 1e-9;
            strict |= double > single + 1e-9;
            supercritical |= double > 0.0;
        }
        if supercritical && !strict {
            strict_everywhere = false;
        }
    }
    r.check(
        "C8 double rooms dominate single rooms",
        dominated && strict_everywhere,
        format!("min(zeta_double - zeta_single) = {worst:.3e}; strict gain on every supercritical curve: {strict_everywhere}"),
    );
}

fn c9(r: &mut Report) {
    let cases = [
        ("scenario 1", ClassSchedule::scenario1(), 0.243, 0.432),
        ("scenario 2", ClassSchedule::scenario2(), 0.203, 0.309),
    ];
    for (name, schedule, want_none, want_minor) in cases {
        let config = SimConfig::new(schedule, 0.01, 2020);
        let (stats, t) = timed(|| ensemble(&config, 10_000).unwrap());
        r.check(
            &format!("C9 {name} outbreak probabilities"),
            within(stats.p_no_community_infection, want_none, 0.03)
                && within(stats.p_no_major_outbreak, want_minor, 0.03)
                && t < Duration::from_secs(120),
            format!(
                "p_no_community = {:.4} ({want_none} +- 0.03), p_no_major = {:.4} ({want_minor} +- 0.03), {t:.2?}",
                stats.p_no_community_infection, stats.p_no_major_outbreak
            ),
        );
    }
}

/// Final-size distribution on three students who all share three classes,
/// by enumerating the (susceptible, infectious) chain.
fn three_student_final_sizes(p: f64, q: f64) -> [f64; 4] {
    fn binom(n: u32, k: u32, p: f64) -> f64 {
        let c = (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1));
        c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
    }
    fn solve(s: u32, i: u32, p: f64, q: f64, memo: &mut HashMap<(u32, u32), [f64; 4]>) -> [f64; 4] {
        if i == 0 {
            let mut out = [0.0; 4];
            out[(3 - s) as usize] = 1.0;
            return out;
        }
        if let Some(v) = memo.get(&(s, i)) {
            return *v;
        }
        // Each susceptible shares three classes with every infectious student.
        let infect = 1.0 - (1.0 - p).powi(3 * i as i32);
        let mut acc = [0.0; 4];
        let mut stay = 0.0;
        for x in 0..=s {
            for y in 0..=i {
                let w = binom(s, x, infect) * binom(i, y, 1.0 - q);
                if x == 0 && y == i {
                    stay = w;
                    continue;
                }
                let next = solve(s - x, y + x, p, q, memo);
                for k in 0..4 {
                    acc[k] += w * next[k];
                }
            }
        }
        let out = acc.map(|a| a / (1.0 - stay));
        memo.insert((s, i), out);
        out
    }
    solve(2, 1, p, q, &mut HashMap::new())
}

fn c10(r: &mut Report) {
    for (p, q) in [(0.1, 0.5), (0.3, 0.2)] {
        let exact = three_student_final_sizes(p, q);
        let mut config = SimConfig::new(ClassSchedule::new(vec![3, 3, 3]).unwrap(), p, 10);
        config.quarantine_prob = q;
        let runs = 100_000;
        let (stats, t) = timed(|| ensemble(&config, runs).unwrap());
        let mut counts = [0usize; 4];
        for &s in &stats.final_sizes {
            counts[s as usize] += 1;
        }
        let mut ok = t < Duration::from_secs(30);
        let mut parts = Vec::new();
        for size in 1..=3 {
            let est = counts[size] as f64 / runs as f64;
            let se = (exact[size] * (1.0 - exact[size]) / runs as f64).sqrt();
            ok &= (est - exact[size]).abs() <= 3.0 * se;
            parts.push(format!("P({size}) {est:.4} vs {:.4}", exact[size]));
        }
        r.check(
            &format!("C10 three-student chain, p={p} q={q}"),
            ok,
            format!("{}, {t:.2?}", parts.join(", ")),
        );
    }
}

fn c11(r: &mut Report) {
    let bin = env!("CARGO_BIN_EXE_campus-epi");
    let invocations: [&[&str]; 5] = [
        &[
            "simulate",
            "--schedule",
            "scenario1",
            "--runs",
            "300",
            "--seed",
            "11",
            "--final-sizes",
        ],
        &[
            "simulate",
            "--schedule",
            "scenario2",
            "--runs",
            "200",
            "--seed",
            "5",
            "--freeze-enrollment",
        ],
        &[
            "dorm",
            "--variant",
            "double",
            "--local",
            "0.3,0.5,0.7,0.9",
            "--npg",
            "0:3:0.25",
        ],
        &["cutoff", "--schedule", "range10to120", "--p", "0.004:0.012:0.004"],
        &["classes", "--schedule", "scenario2", "--p", "0.005,0.01"],
    ];
    let mut all_same = true;
    for args in invocations {
        let outputs: Vec<Vec<u8>> = ["1", "2", "4"]
            .iter()
            .map(|threads| {
                let out = Command::new(bin)
                    .args(args)
                    .env("CAMPUS_EPI_THREADS", threads)
                    .output()
                    .expect("binary runs");
                assert!(
                    out.status.success(),
                    "{args:?}: {}",
                    String::from_utf8_lossy(&out.stderr)
                );
                out.stdout
            })
            .collect();
        all_same &= outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
    }
    r.check(
        "C11 byte-identical CSV across thread counts",
        all_same,
        format!(
            "{} invocations x CAMPUS_EPI_THREADS in {{1, 2, 4}}",
            invocations.len()
        ),
    );
}

fn qualitative(r: &mut Report) {
    let one = ensemble(&SimConfig::new(ClassSchedule::scenario1(), 0.01, 77), 2000).unwrap();
    let two = ensemble(&SimConfig::new(ClassSchedule::scenario2(), 0.01, 77), 2000).unwrap();
    let mut weeks: Vec<f64> = one
        .major_runs()
        .map(|i| f64::from(one.peak_step[i]) / f64::from(STEPS_PER_WEEK))
        .collect();
    weeks.sort_by(f64::total_cmp);
    let median_week = weeks[weeks.len() / 2];
    r.check(
        "Q1 scenario 1 major outbreaks peak near week 11",
        within(median_week, 11.0, 3.0),
        format!("median peak week {median_week} over {} major runs", weeks.len()),
    );
    let horizon = one.p50.len().max(two.p50.len());
    let at = |v: &[f64], t: usize| *v.get(t).unwrap_or_else(|| v.last().unwrap());
    let medians_dominate = (0..horizon).all(|t| at(&two.p50, t) >= at(&one.p50, t));
    let (_, final_one, _) = one.final_size_quartiles();
    let (_, final_two, _) = two.final_size_quartiles();
    r.check(
        "Q2 scenario 2 medians dominate scenario 1",
        medians_dominate && final_two > final_one,
        format!(
            "median final size {final_two} vs {final_one}; per-step medians dominate: {medians_dominate}"
        ),
    );
}

fn main() {
    let mut report = Report { failures: 0 };
    c1(&mut report);
    c2(&mut report);
    c3(&mut report);
    c4(&mut report);
    c5(&mut report);
    c6(&mut report);
    c7(&mut report);
    c8(&mut report);
    c9(&mut report);
    c10(&mut report);
    c11(&mut report);
    qualitative(&mut report);
    println!("acceptance: {} failing check(s)", report.failures);
    if report.failures > 0 {
        std::process::exit(1);
    }
}
