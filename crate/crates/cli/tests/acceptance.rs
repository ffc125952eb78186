//! End-to-end acceptance checks, one line per criterion.

#[path = "../../core/tests/support/mod.rs"]
mod support;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use iotforge_core::codegen::descriptor::FieldSchema;
use iotforge_core::layout::{self, ProjectLayout};
use iotforge_core::mapper::{Mapper, MapperConfig};
use iotforge_core::model::{PrimType, SensorKind};
use iotforge_core::pipeline::{link_project, load_inputs, simulate};
use iotforge_core::sim::*;
use iotforge_core::validate::{validate_project, Project};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{corpus_dir, gen, load, mutate, roundtrip, CORPORA};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn cfg(seed: u64) -> MapperConfig {
    MapperConfig {
        seed,
        ..Default::default()
    }
}

fn publishes<'a>(log: &'a RunLog, event: &'a str) -> impl Iterator<Item = &'a LogEntry> + 'a {
    log.entries
        .iter()
        .filter(move |e| matches!(&e.entry, Entry::Publish { event: ev, .. } if ev == event))
}

fn run_corpus(name: &str, p: &Project, traces: &SensorTraces) -> Result<RunLog, String> {
    let layout = ProjectLayout::new(corpus_dir(name));
    let linked = link_project(p, &cfg(0)).map_err(|e| e.to_string())?;
    let (_, seeds) = load_inputs(&layout).map_err(|e| e.to_string())?;
    run_simulation(&linked.packages, traces, &seeds, DEFAULT_UNTIL_MS).map_err(|e| e.to_string())
}

fn corpus_traces(name: &str) -> SensorTraces {
    load_inputs(&ProjectLayout::new(corpus_dir(name))).unwrap().0
}

fn corpus_compilation() -> Outcome {
    let mut sites = 0;
    let mut slowest = Duration::ZERO;
    for name in CORPORA {
        let start = Instant::now();
        let loaded = layout::check(&corpus_dir(name)).map_err(|e| e.to_string())?;
        let took = start.elapsed();
        slowest = slowest.max(took);
        let errors = loaded.diagnostics.iter().filter(|d| d.is_error()).count();
        ensure!(errors == 0, "{name}: {errors} error(s)");
        ensure!(took < Duration::from_secs(1), "{name}: check took {took:?}");
        let p = loaded.project.ok_or(format!("{name}: no project"))?;
        for (label, m) in mutate::mutations(&p) {
            sites += 1;
            ensure!(
                validate_project(&m).iter().any(|d| d.is_error()),
                "{name}: mutating {label} raised no error"
            );
        }
    }
    Ok(format!("3 corpora clean, {sites} mutations all rejected, slowest check {slowest:?}"))
}

fn hvac_scenario() -> Outcome {
    let layout = ProjectLayout::new(corpus_dir("hvac"));
    let (_, log) = simulate(&layout, &load("hvac"), &cfg(0), DEFAULT_UNTIL_MS).map_err(|e| e.to_string())?;
    let story: Vec<String> = log
        .entries
        .iter()
        .filter_map(|e| match &e.entry {
            Entry::Publish { event, .. } => Some(format!("{} publish {event}", e.t)),
            Entry::Request { target, key, .. } => Some(format!("{} request {target} {key}", e.t)),
            Entry::Response { response, status, .. } => Some(format!("{} response {response} {status:?}", e.t)),
            Entry::Command {
                actuator, action, args, ..
            } => Some(format!("{} command {actuator}.{action}{args:?}", e.t)),
            _ => None,
        })
        .collect();
    let expected = [
        "10000 publish badgeDetected",
        "10001 request ProfileDB \"12\"",
        "10006 response profile Ok",
        "10006 publish tempPref",
        "10007 command Heater.SetTemp[Double(30.0)]",
        "60000 publish badgeDisappeared",
        "60001 publish tempPref",
        "60002 command Heater.Off[]",
    ];
    ensure!(story == expected, "got {story:#?}");
    let pref = publishes(&log, "tempPref").next().unwrap();
    let Entry::Publish { payload, .. } = &pref.entry else { unreachable!() };
    ensure!(payload["tempValue"] == Value::Double(30.0), "tempPref carried {:?}", payload["tempValue"]);
    Ok(format!("{} steps in order", expected.len()))
}

fn fire_scenario() -> Outcome {
    let start = Instant::now();
    let p = load("fire");
    let alarm = |log: &RunLog| {
        let on = log
            .entries
            .iter()
            .any(|e| matches!(&e.entry, Entry::Command { actuator, action, .. } if actuator == "Alarm" && action == "On"));
        let notified = log.entries.iter().any(
            |e| matches!(&e.entry, Entry::Notify { interactor, event, .. } if interactor == "EndUserApp" && event == "fireNotify"),
        );
        (on, notified)
    };
    let hot = run_corpus("fire", &p, &corpus_traces("fire"))?;
    ensure!(alarm(&hot) == (true, true), "fire run: (alarm, notify) = {:?}", alarm(&hot));
    let mut quiet = corpus_traces("fire");
    for r in quiet.readings.get_mut("SmokeDetector").unwrap() {
        r.fields.insert("smokeValue".into(), Value::Double(650.0));
    }
    let cold = run_corpus("fire", &p, &quiet)?;
    ensure!(alarm(&cold) == (false, false), "quiet run: (alarm, notify) = {:?}", alarm(&cold));
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("alarm and notify with smoke > 650, none at 650, {took:?}"))
}

fn with_period(p: &Project, d: u64, k: u64) -> Project {
    let mut p = p.clone();
    for s in &mut p.domain.sensors {
        if let SensorKind::Periodic {
            sample_period_ms,
            duration_ms,
        } = &mut s.kind
        {
            *sample_period_ms = d;
            *duration_ms = k;
        }
    }
    p
}

fn periodic_count() -> Outcome {
    let p = load("fire");
    let traces = corpus_traces("fire");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pairs = vec![(1000, 360_000)];
    while pairs.len() < 200 {
        let d = rng.random_range(1..=60_000u64);
        let k = d * rng.random_range(0..=400) + rng.random_range(0..d);
        pairs.push((d, k));
    }
    for (d, k) in pairs {
        let log = run_corpus("fire", &with_period(&p, d, k), &traces)?;
        let n = publishes(&log, "tempMeasurement").count() as u64;
        ensure!(n == k / d, "d={d}ms k={k}ms: {n} publishes, expected {}", k / d);
    }
    Ok("200 pairs exact, d=1s k=360s gives 360".into())
}

fn avg_oracle() -> Outcome {
    const WINDOWS: usize = 500;
    let p = with_period(&load("fire"), 1000, WINDOWS as u64 * 5 * 1000);
    let mut traces = corpus_traces("fire");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<f64> = (0..WINDOWS * 5)
        .map(|_| rng.random_range(-1.0e3..1.0e3) * 10f64.powi(rng.random_range(-3..4)))
        .collect();
    let temp = traces.readings.get_mut("TemperatureSensor").unwrap();
    temp.clear();
    for (i, v) in samples.iter().enumerate() {
        temp.push(Reading {
            t: (i as u64 + 1) * 1000,
            event: None,
            fields: Payload::from([
                ("tempValue".into(), Value::Double(*v)),
                ("unitOfMeasurement".into(), Value::Str("C".into())),
            ]),
        });
    }
    let log = run_corpus("fire", &p, &traces)?;
    let outputs: Vec<f64> = publishes(&log, "roomAvgTempMeasurement")
        .map(|e| match &e.entry {
            Entry::Publish { payload, .. } => payload["tempValue"].as_f64().unwrap_or(f64::NAN),
            _ => unreachable!(),
        })
        .collect();
    ensure!(outputs.len() == WINDOWS, "{} averages for {WINDOWS} windows", outputs.len());
    let mut worst = 0.0f64;
    for (w, got) in samples.chunks(5).zip(&outputs) {
        // Compensated summation as the reference.
        let mut sum = 0.0f64;
        let mut c = 0.0f64;
        for x in w {
            let y = x - c;
            let t = sum + y;
            c = (t - sum) - y;
            sum = t;
        }
        let mean = sum / 5.0;
        let rel = if mean == 0.0 { got.abs() } else { ((got - mean) / mean).abs() };
        worst = worst.max(rel);
        ensure!(rel <= 1e-12, "window {w:?}: got {got}, mean {mean}");
    }
    Ok(format!("{WINDOWS} windows, worst relative error {worst:e}"))
}

fn broker_soundness() -> Outcome {
    let events = ["tempMeasurement", "humidity"];
    let fields = vec![FieldSchema {
        name: "v".into(),
        ty: PrimType::Double,
    }];
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for round in 0..300 {
        let rooms: Vec<String> = (0..rng.random_range(1..=5)).map(|i| format!("home/room#{i}")).collect();
        let mut b = Broker::new();
        for e in events {
            b.declare_event(e, fields.clone());
        }
        let mut subs = Vec::new();
        for _ in 0..rng.random_range(0..=10) {
            let scope = if rng.random_bool(0.3) {
                Scope::Global
            } else {
                Scope::SameLocation(rooms.choose(&mut rng).unwrap().clone())
            };
            let s = Subscription {
                subscriber: format!("S{}", rng.random_range(0..6)),
                event: events.choose(&mut rng).unwrap().to_string(),
                scope,
            };
            b.subscribe(s.clone()).map_err(|e| e.to_string())?;
            subs.push(s);
        }
        let mut expected = BTreeSet::new();
        for _ in 0..rng.random_range(0..=50) {
            let location = rooms.choose(&mut rng).unwrap().clone();
            let event = events.choose(&mut rng).unwrap().to_string();
            let seq = b
                .publish(Message {
                    event: event.clone(),
                    payload: Payload::from([("v".into(), Value::Double(1.0))]),
                    publisher: "P".into(),
                    location: location.clone(),
                })
                .map_err(|e| e.to_string())?;
            for s in &subs {
                let in_scope = match &s.scope {
                    Scope::Global => true,
                    Scope::SameLocation(r) => *r == location,
                };
                if s.event == event && in_scope {
                    expected.insert((s.subscriber.clone(), seq));
                }
            }
        }
        b.drain(u64::MAX);
        let got: BTreeSet<(String, u64)> = b
            .log()
            .entries
            .iter()
            .filter_map(|e| match &e.entry {
                Entry::Deliver {
                    subscriber, publish_seq, ..
                } => Some((subscriber.clone(), *publish_seq)),
                _ => None,
            })
            .collect();
        ensure!(got == expected, "round {round}: delivered {got:?}, expected {expected:?}");
    }
    // Every delivery in the corpus runs answers a publish of the same event.
    for name in CORPORA {
        let log = run_corpus(name, &load(name), &corpus_traces(name))?;
        let by_seq: BTreeMap<u64, &str> = log
            .entries
            .iter()
            .filter_map(|e| match &e.entry {
                Entry::Publish { event, .. } => Some((e.seq, event.as_str())),
                _ => None,
            })
            .collect();
        for e in &log.entries {
            if let Entry::Deliver { event, publish_seq, .. } = &e.entry {
                ensure!(by_seq.get(publish_seq) == Some(&event.as_str()), "{name}: stray delivery at seq {}", e.seq);
            }
        }
    }
    Ok("300 randomized brokers match the cross join".into())
}

fn mapper_properties() -> Outcome {
    let m = Mapper::new();
    let mut worst = 0.0f64;
    for name in CORPORA {
        let p = load(name);
        for seed in [0, 7, 42, u64::MAX] {
            let a = m.map_services(&p, &cfg(seed)).map_err(|e| e.to_string())?.to_json();
            let b = m.map_services(&p, &cfg(seed)).map_err(|e| e.to_string())?.to_json();
            ensure!(a == b, "{name}: seed {seed} is not byte-deterministic");
        }
        let mut pins = BTreeMap::new();
        for d in &p.deploy.devices {
            for r in &d.resources {
                if p.arch.service(&r.name).is_some() || p.interactor(&r.name).is_some() {
                    pins.insert(r.name.clone(), d.name.clone());
                }
            }
        }
        for seed in 0..100 {
            let plan = m.map_services(&p, &cfg(seed)).map_err(|e| e.to_string())?;
            for (s, d) in &pins {
                ensure!(plan.device_of(s) == Some(d.as_str()), "{name}: seed {seed} moved pinned {s}");
            }
        }
        let eligible: Vec<&str> = p
            .deploy
            .devices
            .iter()
            .filter(|d| d.is_compute_eligible())
            .map(|d| d.name.as_str())
            .collect();
        let free: Vec<&str> = p
            .arch
            .services
            .iter()
            .map(|s| s.name.as_str())
            .filter(|s| !pins.contains_key(*s))
            .collect();
        let mut hits: BTreeMap<(&str, String), u32> = BTreeMap::new();
        const SEEDS: u64 = 10_000;
        for seed in 0..SEEDS {
            let plan = m.map_services(&p, &cfg(seed)).map_err(|e| e.to_string())?;
            for s in &free {
                *hits.entry((s, plan.device_of(s).unwrap_or("").to_string())).or_default() += 1;
            }
        }
        let uniform = 1.0 / eligible.len() as f64;
        for s in &free {
            for d in &eligible {
                let f = hits.get(&(*s, d.to_string())).copied().unwrap_or(0) as f64 / SEEDS as f64;
                worst = worst.max((f - uniform).abs());
                ensure!((f - uniform).abs() <= 0.03, "{name}: {s} on {d} at {f:.4}, uniform {uniform:.4}");
            }
        }
    }
    Ok(format!("deterministic, pins kept over 100 seeds, worst deviation {worst:.4}"))
}

fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn pipeline_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = 0;
    for name in CORPORA {
        let mut runs = Vec::new();
        for i in 0..2 {
            let out = tmp.path().join(format!("{name}-{i}"));
            let status = Command::new(env!("CARGO_BIN_EXE_iotforge"))
                .args(["pipeline", "--seed", "7", "--out"])
                .arg(&out)
                .arg(corpus_dir(name))
                .env("IOTFORGE_NO_COLOR", "1")
                .output()
                .map_err(|e| e.to_string())?;
            ensure!(
                status.status.success(),
                "{name}: pipeline failed: {}",
                String::from_utf8_lossy(&status.stderr)
            );
            runs.push((tree(&out.join("packages")), fs::read(out.join("run.jsonl")).map_err(|e| e.to_string())?));
        }
        ensure!(!runs[0].0.is_empty(), "{name}: no packages written");
        ensure!(runs[0].0 == runs[1].0, "{name}: package trees differ");
        ensure!(runs[0].1 == runs[1].1, "{name}: run logs differ");
        files += runs[0].0.len();
    }
    Ok(format!("{files} package files and 3 run logs identical"))
}

fn round_trip() -> Outcome {
    for name in CORPORA {
        let p = load(name);
        ensure!(roundtrip(&p)? == p, "{name} changed through format and parse");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..100 {
        let p = gen::project(&mut rng);
        ensure!(
            !validate_project(&p).iter().any(|d| d.is_error()),
            "generated spec {i} is not valid"
        );
        ensure!(roundtrip(&p)? == p, "generated spec {i} changed through format and parse");
    }
    Ok("3 corpora and 100 generated specs".into())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("corpus compilation", corpus_compilation),
        ("hvac scenario", hvac_scenario),
        ("fire scenario", fire_scenario),
        ("periodic count", periodic_count),
        ("average oracle", avg_oracle),
        ("broker soundness", broker_soundness),
        ("mapper", mapper_properties),
        ("pipeline determinism", pipeline_determinism),
        ("round trip", round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
