//! Acceptance checks shared by the `acceptance` runner and the test
//! targets. Each check returns a one-line summary or a failure reason.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use freqscope_core::classify::{KnnModel, Ranker};
use freqscope_core::dataset::merge_datasets;
use freqscope_core::defend::{evaluate_defense, sweep, Defense};
use freqscope_core::experiment::{
    keystroke_detection, password_timings, train_and_evaluate, ClassifierParams, PressSchedule, WebsiteExperiment,
};
use freqscope_core::governor::{
    simulate, step_governor, Governor, GovernorState, SimConfig, TurboParams, WorkloadTrace,
};
use freqscope_core::keystroke::{guess_curve, load_password_list, train_password_model, KeystrokeParams, TypingParams};
use freqscope_core::profile::{self, comet_lake, ryzen5, DeviceProfile};
use freqscope_core::sampler::{collect, repetitiveness, CollectPlan};
use freqscope_core::source::FreqSource;
use freqscope_core::{seed, FrequencyTrace, LabeledDataset, Normalization};
use rand::Rng;

pub type Outcome = Result<String, String>;

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub const SEED: u64 = 20240;
pub const USERSPACE_SET_SPEED_KHZ: u32 = 1_800_000;

/// `acc` lies inside the two-sided binomial 99% interval around chance.
pub fn at_chance(acc: f64, classes: usize, n: usize) -> bool {
    let p = 1.0 / classes as f64;
    let half = 2.576 * (p * (1.0 - p) / n as f64).sqrt();
    (acc - p).abs() <= half
}

// ---------------------------------------------------------------- governors

pub fn random_workload(seed: u64) -> WorkloadTrace {
    let mut rng = seed::rng(seed);
    let tick_ms = [5, 10, 20][rng.gen_range(0..3)];
    let n = rng.gen_range(100..300);
    let mut loads = Vec::with_capacity(n);
    while loads.len() < n {
        let len = rng.gen_range(1..30);
        match rng.gen_range(0..3) {
            0 => loads.extend(std::iter::repeat_n(rng.gen_range(0.0..=1.0), len)),
            1 => loads.extend((0..len).map(|_| rng.gen_range(0.0..=1.0))),
            _ => loads.extend((0..len).map(|_| rng.gen_range(0.0..0.05))),
        }
    }
    loads.truncate(n);
    WorkloadTrace::new(loads, tick_ms).unwrap()
}

fn profile_for(g: Governor, seed: u64) -> DeviceProfile {
    let options: Vec<DeviceProfile> =
        profile::builtins().into_iter().filter(|p| Governor::available_for(p.driver).contains(&g)).collect();
    options[(seed % options.len() as u64) as usize].clone()
}

fn config(g: Governor, seed: u64) -> SimConfig {
    let p = profile_for(g, seed);
    let mut cfg = SimConfig::new(p.clone(), g);
    if g == Governor::Userspace {
        let idx = (seed::derive(seed, 7) % p.pstates.len() as u64) as usize;
        cfg = cfg.with_set_speed(p.pstates[idx]);
    }
    cfg
}

fn check_trace(g: Governor, w: &WorkloadTrace, cfg: &SimConfig, t: &FrequencyTrace) -> Result<(), String> {
    let p = &cfg.profile;
    let top = cfg.top_khz();
    for (i, &s) in t.samples.iter().enumerate() {
        ensure(p.pstate_index(s).is_some() && s >= p.min_freq_khz && s <= top, || {
            format!("{g} on {}: sample {i} = {s} out of bounds", p.name)
        })?;
    }
    ensure(simulate(w, cfg).unwrap() == *t, || format!("{g}: nondeterministic"))?;
    let idx: Vec<usize> = t.samples.iter().map(|&s| p.pstate_index(s).unwrap()).collect();
    match g {
        Governor::Conservative => {
            let first = p.pstate_index(p.min_freq_khz).unwrap();
            for (i, w) in std::iter::once(&[first, idx[0]][..]).chain(idx.windows(2)).enumerate() {
                ensure(w[0].abs_diff(w[1]) <= 1, || {
                    format!("conservative jumped {} states at tick {i}", w[0].abs_diff(w[1]))
                })?;
            }
        }
        Governor::Interactive => {
            let ip = &cfg.interactive;
            let hold = (ip.boostpulse_duration_ms / w.tick_ms) as usize;
            for (i, &l) in w.loads.iter().enumerate() {
                if l >= ip.load_trigger && t.samples[i] >= ip.hispeed_freq_khz {
                    let end = (i + hold).min(t.len());
                    ensure(t.samples[i..end].iter().all(|&s| s >= ip.hispeed_freq_khz), || {
                        format!("interactive left hispeed within the boost hold after tick {i}")
                    })?;
                }
            }
            let gap = ip.min_sample_time_ms.div_ceil(w.tick_ms) as usize;
            let changes: Vec<usize> = (1..t.len()).filter(|&i| t.samples[i] != t.samples[i - 1]).collect();
            for c in changes.windows(2) {
                ensure(c[1] - c[0] >= gap, || format!("interactive changed at ticks {} and {}", c[0], c[1]))?;
            }
        }
        Governor::Ondemand => {
            // a pointwise heavier workload never lowers the frequency
            let mut rng = seed::rng(seed::fnv1a(format!("{:?}", w.loads.first()).as_bytes()));
            let heavier: Vec<f64> = w.loads.iter().map(|&l| (l + rng.gen_range(0.0..0.3)).min(1.0)).collect();
            let plain = SimConfig { turbo: TurboParams::disabled(p), ..cfg.clone() };
            let a = simulate(w, &plain).unwrap();
            let b = simulate(&WorkloadTrace::new(heavier, w.tick_ms).unwrap(), &plain).unwrap();
            ensure(a.samples.iter().zip(&b.samples).all(|(x, y)| x <= y), || "ondemand not monotone in load".into())?;
            // and per step, from any reached state, with turbo active
            let mut state = GovernorState::initial(cfg);
            for &l in &w.loads {
                let hi = (l + 0.2).min(1.0);
                let lo_f = step_governor(&state, l, w.tick_ms, cfg).unwrap().current_freq_khz;
                let hi_f = step_governor(&state, hi, w.tick_ms, cfg).unwrap().current_freq_khz;
                ensure(lo_f <= hi_f, || format!("ondemand step {l} -> {lo_f} but {hi} -> {hi_f}"))?;
                state = step_governor(&state, l, w.tick_ms, cfg).unwrap();
            }
        }
        _ => {}
    }
    Ok(())
}

/// Bounds, determinism and per-governor laws over `n` random workloads per
/// governor.
pub fn governor_invariants(n: u64) -> Outcome {
    for g in Governor::ALL {
        for s in 0..n {
            let w = random_workload(seed::derive(SEED, s));
            let cfg = config(g, s);
            let t = simulate(&w, &cfg).map_err(|e| format!("{g}: {e}"))?;
            check_trace(g, &w, &cfg, &t)?;
        }
    }
    Ok(format!("{} governors x {n} workloads", Governor::ALL.len()))
}

// ---------------------------------------------------------------- knn oracle

/// Straightforward reference ranking written without the model's
/// data layout: full sort of all points, string-keyed tallies.
pub fn brute_force_rank(train: &[(Vec<f64>, String)], k: usize, x: &[f64]) -> Vec<(String, f64)> {
    let mut d: Vec<(f64, usize)> = train
        .iter()
        .enumerate()
        .map(|(i, (p, _))| {
            let mut s = 0.0;
            for j in 0..p.len() {
                s += (p[j] - x[j]) * (p[j] - x[j]);
            }
            (s.sqrt(), i)
        })
        .collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(dist, i) in &d[..k] {
        let e = votes.entry(train[i].1.as_str()).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += dist;
    }
    let mut closest: BTreeMap<&str, f64> = BTreeMap::new();
    for &(dist, i) in &d {
        closest.entry(train[i].1.as_str()).or_insert(dist);
    }
    let mut voted: Vec<(&str, usize, f64)> = votes.iter().map(|(l, &(v, s))| (*l, v, s / v as f64)).collect();
    voted.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.total_cmp(&b.2)).then(a.0.cmp(b.0)));
    let mut rest: Vec<(&str, f64)> =
        closest.iter().filter(|(l, _)| !votes.contains_key(*l)).map(|(l, d)| (*l, *d)).collect();
    rest.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
    voted
        .into_iter()
        .map(|(l, v, _)| (l.to_string(), v as f64 / k as f64))
        .chain(rest.into_iter().map(|(l, _)| (l.to_string(), 0.0)))
        .collect()
}

pub fn knn_oracle(queries: usize) -> Outcome {
    let mut rng = seed::rng(SEED);
    let mut checked = 0;
    for q in 0..queries {
        // small integer grids make distance ties common
        let dim = rng.gen_range(1..6);
        let n = rng.gen_range(5..60);
        let classes = rng.gen_range(2..8);
        let train: Vec<(Vec<f64>, String)> = (0..n)
            .map(|_| {
                let x = (0..dim).map(|_| rng.gen_range(0..4) as f64).collect();
                (x, format!("c{}", rng.gen_range(0..classes)))
            })
            .collect();
        let k = rng.gen_range(1..=n.min(9));
        let model = KnnModel::fit(k, &train).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(0..4) as f64 + rng.gen_range(0..2) as f64 * 0.5).collect();
        let got = model.rank(&x).map_err(|e| e.to_string())?;
        let want = brute_force_rank(&train, k, &x);
        ensure(got == want, || format!("query {q}: model {got:?} != oracle {want:?}"))?;
        checked += 1;
    }
    Ok(format!("{checked} queries identical"))
}

// ---------------------------------------------------------------- websites

pub fn website(profile: DeviceProfile, g: Governor) -> WebsiteExperiment {
    let mut e = WebsiteExperiment::new(profile, g, 20, 30, SEED);
    if g == Governor::Userspace {
        e.sim = e.sim.clone().with_set_speed(USERSPACE_SET_SPEED_KHZ);
    }
    e
}

pub fn website_dataset(profile: DeviceProfile, g: Governor) -> Result<LabeledDataset, String> {
    website(profile, g).dataset().map_err(|e| e.to_string())
}

pub fn website_fingerprinting() -> Outcome {
    let ds = website_dataset(ryzen5(), Governor::Ondemand)?;
    ensure(ds.len() == 600 && ds.shape() == Some((1000, 10)), || "dataset shape".into())?;
    let knn = train_and_evaluate(&ds, &ClassifierParams::knn(1), &[5]).map_err(|e| e.to_string())?;
    let rf = train_and_evaluate(&ds, &ClassifierParams::forest(SEED), &[5]).map_err(|e| e.to_string())?;
    let (k1, k5, r1, r5) = (knn.top1_accuracy, knn.topk(5).unwrap(), rf.top1_accuracy, rf.topk(5).unwrap());
    let line = format!("knn top1 {k1:.3} top5 {k5:.3}, rf top1 {r1:.3} top5 {r5:.3} on {} test traces", knn.total);
    ensure(knn.total == 60, || format!("expected 60 test traces, got {}", knn.total))?;
    ensure(k1 >= 0.9 && r1 >= 0.9 && k5 >= k1 && r5 >= r1, || line.clone())?;
    Ok(line)
}

pub const SWEEP_GOVERNORS: [Governor; 6] = [
    Governor::Performance,
    Governor::Powersave,
    Governor::Userspace,
    Governor::Ondemand,
    Governor::Conservative,
    Governor::Schedutil,
];

pub fn governor_sweep() -> Outcome {
    let mut parts = Vec::new();
    for g in SWEEP_GOVERNORS {
        let ds = website_dataset(ryzen5(), g)?;
        let r = train_and_evaluate(&ds, &ClassifierParams::knn(1), &[5]).map_err(|e| e.to_string())?;
        let acc = r.top1_accuracy;
        parts.push(format!("{g} {acc:.3}"));
        let pinned = matches!(g, Governor::Performance | Governor::Powersave);
        if pinned {
            ensure(at_chance(acc, 20, r.total), || format!("{g} pinned but top-1 {acc:.3} is not chance"))?;
        } else {
            ensure(acc >= 0.6, || format!("{g} top-1 {acc:.3} < 0.60"))?;
        }
    }
    Ok(parts.join(", "))
}

pub const RESOLUTION_FACTORS: [u32; 6] = [1, 2, 5, 10, 25, 50];

pub fn countermeasures() -> Outcome {
    let ds = website_dataset(ryzen5(), Governor::Ondemand)?;
    let params = ClassifierParams::knn(1);
    let (base, masked) =
        evaluate_defense(&Defense::ConstantMask { freq_khz: 2_300_000 }, &ds, &params).map_err(|e| e.to_string())?;
    ensure(at_chance(masked.top1_accuracy, 20, masked.total), || {
        format!("constant_mask top-1 {:.3} not at chance", masked.top1_accuracy)
    })?;
    let defenses: Vec<Defense> =
        RESOLUTION_FACTORS.iter().map(|&factor| Defense::ResolutionReduce { factor }).collect();
    let rows = sweep(&defenses, &ds, &params).map_err(|e| e.to_string())?;
    let accs: Vec<f64> = rows.iter().map(|r| r.top1_defended).collect();
    let curve = accs.iter().map(|a| format!("{a:.3}")).collect::<Vec<_>>().join("/");
    for w in accs.windows(2) {
        ensure(w[1] <= w[0] + 0.03 + 1e-9, || format!("resolution sweep not non-increasing: {curve}"))?;
    }
    let drop = base.top1_accuracy - accs[3];
    ensure(drop >= 0.25, || format!("factor 10 lost only {:.1} points ({curve})", drop * 100.0))?;
    Ok(format!("mask {:.3}, resolution {curve}, factor 10 loses {:.1} points", masked.top1_accuracy, drop * 100.0))
}

pub fn universal_model() -> Outcome {
    let params = ClassifierParams::knn(1).with_normalization(Normalization::MinmaxPerProfile);
    let r = website_dataset(ryzen5(), Governor::Ondemand)?;
    let c = website_dataset(comet_lake(), Governor::Powersave)?;
    let acc =
        |ds: &LabeledDataset| train_and_evaluate(ds, &params, &[]).map(|r| r.top1_accuracy).map_err(|e| e.to_string());
    let (ar, ac) = (acc(&r)?, acc(&c)?);
    let merged = merge_datasets(&[r, c]).map_err(|e| e.to_string())?;
    let am = acc(&merged)?;
    let line = format!("ryzen5 {ar:.3}, comet_lake {ac:.3}, merged {am:.3}");
    ensure(am >= ar.max(ac) - 0.10, || line.clone())?;
    Ok(line)
}

// ---------------------------------------------------------------- keystrokes

pub fn keystroke_detection_check() -> Outcome {
    let p = KeystrokeParams::default();
    let clean = keystroke_detection(&PressSchedule::default(), &p, 200, 20, SEED).map_err(|e| e.to_string())?;
    ensure(clean.recall == 1.0 && clean.precision == 1.0, || format!("wide gaps: {clean:?}"))?;
    let close = PressSchedule { close_fraction: 0.2, ..Default::default() };
    let fused = keystroke_detection(&close, &p, 200, 20, SEED).map_err(|e| e.to_string())?;
    ensure(fused.count_accuracy >= 0.95, || format!("close gaps: {fused:?}"))?;
    Ok(format!(
        "wide gaps recall {:.3} precision {:.3}; 20% close gaps count accuracy {:.3}",
        clean.recall, clean.precision, fused.count_accuracy
    ))
}

pub fn password_recovery() -> Outcome {
    let passwords = load_password_list(freqscope_core::keystroke::BUILTIN_PASSWORDS);
    let ds = password_timings(&passwords, 10, &TypingParams::default(), &KeystrokeParams::default(), SEED)
        .map_err(|e| e.to_string())?;
    let (model, test) = train_password_model(&ds, SEED).map_err(|e| e.to_string())?;
    let curve = guess_curve(&model, &test, passwords.len()).map_err(|e| e.to_string())?;
    let line = format!(
        "{} passwords, {} test vectors, guesses 1/2/3 = {:.3}/{:.3}/{:.3}",
        passwords.len(),
        test.len(),
        curve[0],
        curve[1],
        curve[2]
    );
    ensure(curve.windows(2).all(|w| w[0] <= w[1]), || format!("curve decreases: {line}"))?;
    ensure(curve[0] >= 0.8 && curve[2] >= 0.95, || line.clone())?;
    Ok(line)
}

// ---------------------------------------------------------------- sampler

pub fn sampler_contract() -> Outcome {
    let mut rng = seed::rng(SEED);
    let p = comet_lake();
    let samples: Vec<u32> = (0..2000).map(|_| p.pstates[rng.gen_range(0..p.pstates.len())]).collect();
    let source_trace = FrequencyTrace::new(samples, 10, &p.name).unwrap();
    let mut plan = CollectPlan::new("replayed", 10, 1000, 2);
    plan.inter_measurement_sleep_ms = 0;
    let got = collect(&plan, &mut FreqSource::replay(source_trace.clone())).map_err(|e| e.to_string())?;
    let rejoined: Vec<u32> = got.iter().flat_map(|t| t.samples.iter().copied()).collect();
    ensure(rejoined == source_trace.samples, || "replayed samples differ from the source".into())?;

    let w = freqscope_core::synth_workload(
        &freqscope_core::WorkloadKind::Website(freqscope_core::workload::WebsiteParams::default()),
        SEED,
    )
    .map_err(|e| e.to_string())?;
    let mut src = FreqSource::sim(SimConfig::new(ryzen5(), Governor::Ondemand), w).map_err(|e| e.to_string())?;
    let rep = repetitiveness(&mut src, &[1, 10], 400).map_err(|e| e.to_string())?;
    let line = format!("replay bit-exact; mean run length {:.2} at 1 ms vs {:.2} at 10 ms", rep[&1], rep[&10]);
    ensure(rep[&1] > rep[&10], || line.clone())?;
    Ok(line)
}

pub struct Criterion {
    pub id: u32,
    pub name: &'static str,
    pub limit: Duration,
    pub run: fn() -> Outcome,
}

pub fn criteria() -> Vec<Criterion> {
    let c = |id, name, secs, run| Criterion { id, name, limit: Duration::from_secs(secs), run };
    vec![
        c(1, "governor invariants", 30, || governor_invariants(1000)),
        c(2, "knn oracle equivalence", 5, || knn_oracle(200)),
        c(3, "website fingerprinting", 120, website_fingerprinting),
        c(4, "governor sweep", 600, governor_sweep),
        c(5, "keystroke detection", 60, keystroke_detection_check),
        c(6, "password recovery", 60, password_recovery),
        c(7, "countermeasure efficacy", 300, countermeasures),
        c(8, "universal model", 180, universal_model),
        c(9, "sampler contract", 10, sampler_contract),
    ]
}

/// Runs one criterion and enforces its time limit.
pub fn run(c: &Criterion) -> (bool, String, Duration) {
    let t0 = Instant::now();
    let out = (c.run)();
    let took = t0.elapsed();
    match out {
        Ok(detail) if took <= c.limit => (true, detail, took),
        Ok(detail) => (false, format!("{detail}; exceeded {:?}", c.limit), took),
        Err(e) => (false, e, took),
    }
}
