//! Acceptance criteria, one pass/fail line each.
//!
//! Run with `cargo test -p multisim --test acceptance -- --nocapture` to see
//! the table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};
use std::fs;
use std::time::{Duration, Instant};

use multisim::cli::report::Format;
use multisim::cli::{cmd_run, RunArgs};
use multisim::experiment::presets::{fig1, two_particle};
use multisim::experiment::{classify_timing, ChoicePlacement, ExperimentConfig, Mode, TimingClass};
use multisim::kinematics::{boost, order_flip_boost, order_in_frame, Event, Frame, Ordering, SIMULTANEITY_TOL};
use multisim::montecarlo::{run, sample, RunPlan, TrialRecord};
use multisim::stats::{
    chsh, chsh_exact, correlator, no_signaling_exact, no_signaling_test, single_particle_rates, ChshSettings,
    SignalingVerdict,
};
use multisim::theories::{ms_predict, predict, qm_predict, JointDistribution, Settings, TheoryModel};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err(e: impl ToString) -> String {
    e.to_string()
}

fn chsh_settings() -> Vec<Settings> {
    // a = 0, a′ = π/2, b = −π/4, b′ = π/4
    vec![
        Settings::new(0.0, -FRAC_PI_4),
        Settings::new(0.0, FRAC_PI_4),
        Settings::new(FRAC_PI_2, -FRAC_PI_4),
        Settings::new(FRAC_PI_2, FRAC_PI_4),
    ]
}

fn pair_plan(cfg: ExperimentConfig, model: TheoryModel, seed: u64) -> RunPlan {
    RunPlan {
        config: cfg,
        model,
        settings: chsh_settings(),
        trials_per_setting: 50_000,
        seed,
    }
}

fn analytic(plan: &RunPlan) -> [JointDistribution; 4] {
    let v: Vec<_> = plan
        .settings
        .iter()
        .map(|s| predict(plan.model, &plan.config, s.alpha, s.beta).unwrap())
        .collect();
    v.try_into().unwrap()
}

fn criterion_1() -> Check {
    let start = Instant::now();
    let cfg = fig1(0.1);
    ensure(classify_timing(&cfg, SIMULTANEITY_TOL) == Ok(TimingClass::BeforeBefore), || "fig1(0.1) not before-before".into())?;
    let d = predict(TheoryModel::Multisimultaneity, &cfg, 0.0, 0.0).map_err(err)?;
    let recs = sample(&d, 100_000, 7).map_err(err)?;
    let r = single_particle_rates(&recs).map_err(err)?;
    let el = start.elapsed();
    ensure((r.joint - 0.25).abs() <= 0.0041, || format!("P(joint) = {}", r.joint))?;
    ensure((r.none - 0.25).abs() <= 0.0041, || format!("P(none) = {}", r.none))?;
    ensure((r.exclusive - 0.5).abs() <= 0.0047, || format!("P(exclusive) = {}", r.exclusive))?;
    ensure(el < Duration::from_secs(5), || format!("runtime {el:?}"))?;
    Ok(format!("joint={:.4} none={:.4} exclusive={:.4} in {el:.2?}", r.joint, r.none, r.exclusive))
}

fn criterion_2() -> Check {
    for beta in [0.0, 0.1, -0.3, 0.9] {
        let d = predict(TheoryModel::PreferredFrameQM, &fig1(beta), 0.0, 0.0).map_err(err)?;
        let recs = sample(&d, 100_000, 11).map_err(err)?;
        let r = single_particle_rates(&recs).map_err(err)?;
        let doubles = recs
            .iter()
            .filter(|t| matches!(t.outcome, multisim::Outcome::Fire { plus, minus } if plus == minus))
            .count();
        ensure(r.exclusive == 1.0 && doubles == 0, || format!("beta={beta}: {doubles} double/no-fire events"))?;
    }
    Ok("P(exclusive)=1 for D(+) speeds 0, 0.1, -0.3, 0.9".into())
}

fn criterion_3() -> Check {
    let cfg = fig1(0.0);
    ensure(
        classify_timing(&cfg, SIMULTANEITY_TOL) == Ok(TimingClass::StandardBeforeAfter),
        || "rest config not standard".into(),
    )?;
    let d = predict(TheoryModel::Multisimultaneity, &cfg, 0.0, 0.0).map_err(err)?;
    let recs = sample(&d, 100_000, 13).map_err(err)?;
    let r = single_particle_rates(&recs).map_err(err)?;
    ensure(r.exclusive == 1.0, || format!("P(exclusive) = {}", r.exclusive))?;
    // D(−) chooses first; D(+) fires exactly when D(−) did not.
    for t in &recs {
        let multisim::Outcome::Fire { plus, minus } = t.outcome else {
            return Err("pair outcome in single-particle run".into());
        };
        ensure(plus == !minus, || format!("trial {} broke anti-correlation", t.trial))?;
    }
    Ok(format!("P(exclusive)=1, D(+)={:.4}", r.exclusive_plus))
}

fn criterion_4() -> Check {
    let plan = pair_plan(two_particle(0.0, 0.1), TheoryModel::Multisimultaneity, 21);
    let exact = chsh_exact(&analytic(&plan), 4.0).map_err(err)?;
    ensure(exact.s == 0.0, || format!("analytic S = {}", exact.s))?;
    let recs = run(&plan).map_err(err)?;
    ensure(recs[0].timing == Some(TimingClass::BeforeBefore), || "not before-before".into())?;
    let c = chsh(&recs, &ChshSettings::default(), 4.0).map_err(err)?;
    for corr in &c.correlators {
        ensure(corr.e.abs() <= 4.0 * corr.stderr, || format!("E = {} ± {}", corr.e, corr.stderr))?;
    }
    ensure(c.s <= 2.0 + 4.0 * c.stderr, || format!("S = {}", c.s))?;
    Ok(format!("S={:.4}±{:.4}, analytic S=0", c.s, c.stderr))
}

fn criterion_5() -> Check {
    let start = Instant::now();
    let target = 2.0 * SQRT_2;
    let mut parts = Vec::new();
    for model in [TheoryModel::PreferredFrameQM, TheoryModel::Multisimultaneity] {
        let plan = pair_plan(two_particle(0.0, 0.0), model, 23);
        let exact = chsh_exact(&analytic(&plan), 4.0).map_err(err)?;
        ensure((exact.s - target).abs() <= 1e-12, || format!("{model}: analytic S = {}", exact.s))?;
        let recs = run(&plan).map_err(err)?;
        let c = chsh(&recs, &ChshSettings::default(), 4.0).map_err(err)?;
        ensure((c.s - 2.8284).abs() <= 4.0 * c.stderr, || format!("{model}: S = {} ± {}", c.s, c.stderr))?;
        ensure(c.violates_local_bound, || format!("{model}: violation not flagged"))?;
        parts.push(format!("{model} S={:.4}±{:.4}", c.s, c.stderr));
    }
    let el = start.elapsed();
    ensure(el < Duration::from_secs(10), || format!("runtime {el:?}"))?;
    Ok(format!("{} in {el:.2?}", parts.join(", ")))
}

/// Two-particle setups with random impacts, speeds, placement and phases.
fn random_pair_config(rng: &mut ChaCha8Rng) -> ExperimentConfig {
    let mut cfg = two_particle(rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9));
    cfg.devices[1].t = rng.gen_range(0.0..20.0);
    cfg.devices[1].x = rng.gen_range(-10.0..0.0);
    cfg.devices[2].t = rng.gen_range(0.0..20.0);
    cfg.devices[2].x = rng.gen_range(0.0..10.0);
    cfg.visibility = rng.gen_range(0.0..=1.0);
    cfg.preferred_frame_beta = rng.gen_range(-0.9..0.9);
    if rng.gen_bool(0.3) {
        cfg.placement = ChoicePlacement::AtDetector;
    }
    cfg
}

fn criterion_6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let mut n = 0;
    let mut worst: f64 = 0.0;
    while n < 200 {
        let cfg = random_pair_config(&mut rng);
        let Ok(timing) = classify_timing(&cfg, SIMULTANEITY_TOL) else { continue };
        if timing != TimingClass::StandardBeforeAfter {
            continue;
        }
        let (a, b) = (rng.gen_range(-PI..PI), rng.gen_range(-PI..PI));
        let ms = ms_predict(&cfg, a, b, timing).map_err(err)?;
        let qm = qm_predict(&cfg, a, b).map_err(err)?;
        for (x, y) in ms.probs.iter().zip(qm.probs) {
            worst = worst.max((x - y).abs());
        }
        n += 1;
    }
    ensure(worst <= 1e-12, || format!("max |ms − qm| = {worst}"))?;
    Ok(format!("200 configs, max |ms − qm| = {worst:e}"))
}

fn planted(n: u64) -> Vec<TrialRecord> {
    let mut out = Vec::new();
    for (i, s) in chsh_settings().into_iter().enumerate() {
        // side A: P(+ | b) = 0.6, P(+ | b′) = 0.4
        let probs = if s.beta < 0.0 { [0.3, 0.3, 0.2, 0.2] } else { [0.2, 0.2, 0.3, 0.3] };
        let d = JointDistribution::new(Mode::TwoParticle, probs, s).unwrap();
        out.extend(sample(&d, n, 100 + i as u64).unwrap());
    }
    out
}

fn criterion_7() -> Check {
    let cases = [
        ("qm", pair_plan(two_particle(0.0, 0.0), TheoryModel::PreferredFrameQM, 31)),
        ("ms standard", pair_plan(two_particle(0.0, 0.0), TheoryModel::Multisimultaneity, 32)),
        ("ms before-before", pair_plan(two_particle(0.0, 0.1), TheoryModel::Multisimultaneity, 33)),
    ];
    for (label, plan) in &cases {
        let exact = analytic(plan);
        for d in &exact {
            ensure(d.marginal_a_plus() == 0.5 && d.marginal_b_plus() == 0.5, || format!("{label}: marginal not ½"))?;
        }
        let rep = no_signaling_exact(&exact, 1e-12).map_err(err)?;
        ensure(rep.verdict == SignalingVerdict::ConsistentWithNoSignaling, || format!("{label}: analytic {rep:?}"))?;
        let rep = no_signaling_test(&run(plan).map_err(err)?, 4.0).map_err(err)?;
        ensure(rep.verdict == SignalingVerdict::ConsistentWithNoSignaling, || format!("{label}: sampled {rep:?}"))?;
    }
    let rep = no_signaling_test(&planted(100_000), 4.0).map_err(err)?;
    ensure(rep.verdict == SignalingVerdict::SignalingDetected, || format!("planted case missed: {rep:?}"))?;
    Ok(format!("QM/MS flat; planted ΔP_A = {:.4} detected", rep.side_a.max_delta))
}

fn criterion_8() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let ev = |rng: &mut ChaCha8Rng| Event::new(rng.gen_range(-100.0..100.0), rng.gen_range(-100.0..100.0)).unwrap();
    for _ in 0..1000 {
        let (a, b) = (ev(&mut rng), ev(&mut rng));
        let f = Frame::new(rng.gen_range(-0.999..0.999)).unwrap();
        let (ba, bb) = (boost(&a, &f), boost(&b, &f));
        let lab = (b.t() - a.t()).powi(2) - (b.x() - a.x()).powi(2);
        let moved = (bb.t() - ba.t()).powi(2) - (bb.x() - ba.x()).powi(2);
        ensure((lab - moved).abs() <= 1e-9 * lab.abs().max(1.0), || format!("interval {lab} → {moved}"))?;
    }
    let a = Event::new(0.0, 0.0).unwrap();
    let b = Event::new(2.0, 1.0).unwrap();
    for _ in 0..1000 {
        let f = Frame::new(rng.gen_range(-0.999..=0.999)).unwrap();
        ensure(order_in_frame(&a, &b, &f, SIMULTANEITY_TOL) == Ordering::After, || "timelike order flipped".into())?;
    }
    let mut flips = 0;
    while flips < 1000 {
        let (a, b) = (ev(&mut rng), ev(&mut rng));
        if (b.t() - a.t()).abs() >= (b.x() - a.x()).abs() {
            continue;
        }
        let beta = order_flip_boost(&a, &b).ok_or("no flip for spacelike pair")?;
        ensure(beta.abs() < 1.0, || format!("beta {beta}"))?;
        let lab = order_in_frame(&a, &b, &Frame::LAB, SIMULTANEITY_TOL);
        let moved = order_in_frame(&a, &b, &Frame::new(beta).unwrap(), SIMULTANEITY_TOL);
        ensure(
            matches!((lab, moved), (Ordering::After, Ordering::Before) | (Ordering::Before, Ordering::After)),
            || format!("lab {lab:?} vs {moved:?} at beta {beta}"),
        )?;
        flips += 1;
    }
    Ok("1000 intervals, 1000 frames, 1000 spacelike flips".into())
}

fn criterion_9() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let cfg = dir.path().join("chsh_qm.cfg");
    fs::write(&cfg, multisim::cli::scenario("chsh_qm.cfg")).map_err(err)?;
    let mut outputs = Vec::new();
    for (rep, format) in [("a", Format::Csv), ("b", Format::Csv), ("c", Format::Json), ("d", Format::Json)] {
        let o = cmd_run(&RunArgs {
            config: cfg.clone(),
            out: dir.path().join(rep),
            format,
            model: None,
            trials: None,
            seed: None,
            tolerance_k: 4.0,
        })
        .map_err(err)?;
        outputs.push((fs::read(o.records).map_err(err)?, fs::read(o.report).map_err(err)?));
    }
    ensure(outputs[0] == outputs[1], || "CSV reruns differ".into())?;
    ensure(outputs[2] == outputs[3], || "JSON reruns differ".into())?;
    Ok(format!("byte-identical reruns (CSV records {} bytes)", outputs[0].0.len()))
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 9] = [
        ("1 fig1 MS before-before 25/25/50", criterion_1),
        ("2 fig1 QM one photon-one count", criterion_2),
        ("3 fig1 MS standard timing exclusive", criterion_3),
        ("4 two-particle MS before-before S=0", criterion_4),
        ("5 two-particle QM/MS-standard S=2√2", criterion_5),
        ("6 MS = QM on standard timing", criterion_6),
        ("7 no-signaling", criterion_7),
        ("8 kinematics properties", criterion_8),
        ("9 determinism", criterion_9),
    ];
    let mut failed = Vec::new();
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name:<40} {detail}"),
            Err(detail) => {
                println!("FAIL  {name:<40} {detail}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

#[test]
fn correlator_at_quarter_pi_matches_cosine() {
    // cos(π/4) oracle; N = 100000.
    let cfg = two_particle(0.0, 0.0);
    let d = qm_predict(&cfg, FRAC_PI_4, 0.0).unwrap();
    let c = correlator(&sample(&d, 100_000, 5).unwrap()).unwrap();
    assert!((c.e - 0.707_106_781_186_547_5).abs() <= 3.0 * c.stderr, "E = {} ± {}", c.e, c.stderr);
}
