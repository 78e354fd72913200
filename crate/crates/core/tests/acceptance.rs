//! Acceptance suite: one check per criterion, each printed as a PASS or FAIL
//! line with its runtime. Tolerances and time budgets are pinned below.
//!
//! Runs without the libtest harness so the report is always visible:
//! `cargo test -p rftforge-core --test acceptance`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rftforge_core::action::{parse_action, serialize_action, Action, ScrollDirection};
use rftforge_core::broker::{run_worker, serve, Broker, BrokerClient, LocalClient, TaskTicket, TcpClient};
use rftforge_core::datapipe::{
    filter_duplicates, rebalance, CollectConfig, OnlineDataset, RebalanceRule, Split, SynthConfig, TrajectoryStore,
};
use rftforge_core::env::{run_episode, Difficulty, EnvSpec, TaskInstance, Trajectory};
use rftforge_core::evalkit::{
    action_match, difficulty_table, eval_offline, eval_online, DifficultyRow, MatchRule,
};
use rftforge_core::pipeline::{run, PipelineConfig, PipelineRunRecord, Variant};
use rftforge_core::policy::{fallback_actions, OraclePolicy, Policy, RandomPolicy};
use rftforge_core::ui::{BBox, UiElement, UiScreen};

const TAU: usize = 10;
const TREND_GAP: f64 = 0.10;
const ORDER_TOLERANCE: f64 = 0.02;
const PIPELINE_SEEDS: [u64; 3] = [1, 2, 3];
const TREND_ITERATIONS: usize = 4;
/// Seeded run that shows offline accuracy falling while online success rises.
const DIVERGENCE_SEED: u64 = 17;
const DIVERGENCE_STAGE: &str = "rft-3";
const DETERMINISM_SEED: u64 = 7;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

struct Criterion {
    id: u8,
    name: &'static str,
    budget: Duration,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "action round-trip", budget: secs(1), check: c1_action_round_trip },
        Criterion { id: 2, name: "duplicate filter", budget: secs(5), check: c2_duplicate_filter },
        Criterion { id: 3, name: "rebalancing", budget: secs(5), check: c3_rebalancing },
        Criterion { id: 4, name: "broker exactly-once", budget: secs(30), check: c4_broker_exactly_once },
        Criterion { id: 5, name: "rft trend", budget: secs(300), check: c5_rft_trend },
        Criterion { id: 6, name: "ablation ordering", budget: secs(600), check: c6_ablation_ordering },
        Criterion { id: 7, name: "offline/online divergence", budget: secs(300), check: c7_divergence },
        Criterion { id: 8, name: "relaxed-accuracy oracle", budget: secs(2), check: c8_relaxed_match },
        Criterion { id: 9, name: "oracle solvability", budget: secs(30), check: c9_oracle_solvability },
        Criterion { id: 10, name: "difficulty table", budget: secs(1), check: c10_difficulty_table },
        Criterion { id: 11, name: "determinism", budget: secs(600), check: c11_determinism },
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.check))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_text(&p))));
        let elapsed = started.elapsed();
        let outcome = outcome.and_then(|detail| {
            if elapsed <= c.budget {
                Ok(detail)
            } else {
                Err(format!("{detail}; over the {:.0}s budget", c.budget.as_secs_f64()))
            }
        });
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("[{tag}] criterion {:>2} {:<26} {:>7.2}s  {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn secs(n: u64) -> Duration {
    Duration::from_secs(n)
}

fn panic_text(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn fuzz_text(rng: &mut ChaCha8Rng) -> String {
    const POOL: &[char] = &[
        'a', 'Z', '0', ' ', '"', '\\', '/', '\n', '\t', '\r', '\u{1}', '\u{7f}', 'é', '日', '😀', '{', '}', ':', ',',
    ];
    let len = rng.gen_range(0..24);
    (0..len).map(|_| *POOL.choose(rng).unwrap()).collect()
}

fn c1_action_round_trip() -> Outcome {
    let canonical = [
        (Action::OpenApp { app_name: "Clock".into() }, r#"{"action-type":"open-app","app-name":"Clock"}"#),
        (Action::Click { target: 1 }, r#"{"action-type":"click","target-element":1}"#),
        (Action::LongPress { target: 1 }, r#"{"action-type":"long-press","target-element":1}"#),
        (Action::InputText { text: "Hello World".into() }, r#"{"action-type":"input-text","text":"Hello World"}"#),
        (Action::Scroll(ScrollDirection::Up), r#"{"action-type":"scroll-up"}"#),
        (Action::NavigateHome, r#"{"action-type":"navigate-home"}"#),
        (Action::NavigateBack, r#"{"action-type":"navigate-back"}"#),
        (Action::Wait, r#"{"action-type":"wait"}"#),
    ];
    for (action, text) in &canonical {
        ensure!(serialize_action(action) == *text, "{action:?} serialised as {}", serialize_action(action));
        ensure!(parse_action(text).as_ref() == Ok(action), "{text} did not parse back");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut checked = 0;
    for variant in 0..11 {
        for _ in 0..1000 {
            let a = match variant {
                0 => Action::OpenApp { app_name: fuzz_text(&mut rng) },
                1 => Action::Click { target: rng.gen_range(0..usize::MAX) },
                2 => Action::LongPress { target: rng.gen_range(0..1_000_000) },
                3 => Action::InputText { text: fuzz_text(&mut rng) },
                4..=7 => Action::Scroll(ScrollDirection::ALL[variant - 4]),
                8 => Action::NavigateHome,
                9 => Action::NavigateBack,
                _ => Action::Wait,
            };
            let s = serialize_action(&a);
            ensure!(!s.contains('\n'), "multi-line serialisation {s:?}");
            let back = parse_action(&s).map_err(|e| format!("{s}: {e}"))?;
            ensure!(back == a, "round trip changed {a:?} into {back:?}");
            ensure!(serialize_action(&back) == s, "re-serialisation differs for {s}");
            checked += 1;
        }
    }
    Ok(format!("{} canonical rows, {checked} fuzzed actions", canonical.len()))
}

/// Random walk with extra waits, which never change the screen.
fn noisy_episode(env: &EnvSpec, template: &str, seed: u64) -> Trajectory {
    let instance = env.instantiate(template, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    run_episode(env.reset(&instance).unwrap(), |_, screen, _| {
        let action = if rng.gen_bool(0.35) {
            Action::Wait
        } else {
            fallback_actions(screen).choose(&mut rng).unwrap().clone()
        };
        Ok::<_, ()>(action)
    })
    .unwrap()
}

fn c2_duplicate_filter() -> Outcome {
    let env = EnvSpec::standard();
    let ids: Vec<&str> = env.templates().iter().map(|t| t.id).collect();
    let mut dropped = 0;
    for i in 0..1000u64 {
        let t = noisy_episode(&env, ids[i as usize % ids.len()], i);
        let n = t.steps.len();
        let expected: Vec<_> = (0..n)
            .filter(|&k| k + 1 == n || t.steps[k].screen_before != t.steps[k + 1].screen_before)
            .map(|k| t.steps[k].clone())
            .collect();
        let f = filter_duplicates(&t);
        ensure!(f.steps == expected, "episode {i}: filter disagrees with the adjacent-dedup oracle");
        ensure!(f.step_count == f.steps.len() && f.ret == t.ret, "episode {i}: bookkeeping changed");
        ensure!(filter_duplicates(&f) == f, "episode {i}: filter not idempotent");
        ensure!(
            f.steps.windows(2).all(|w| w[0].fingerprint != w[1].fingerprint),
            "episode {i}: adjacent fingerprints remain equal"
        );
        dropped += n - f.steps.len();
    }
    Ok(format!("1000 trajectories, {dropped} no-op steps removed"))
}

fn stub(template: String, seed: u64, ret: u8) -> Trajectory {
    Trajectory {
        instance: TaskInstance { template_id: template, params: BTreeMap::new(), seed, goal: String::new(), max_steps: 10 },
        steps: Vec::new(),
        ret,
        step_count: 0,
    }
}

/// Straightforward reimplementation of the oversampling rule.
fn brute_rebalance(groups: &BTreeMap<String, Vec<u64>>, tau: usize) -> Vec<(String, u64)> {
    let mut big: Vec<usize> = groups.values().map(Vec::len).filter(|&c| c >= tau).collect();
    big.sort();
    let target = match big.len() {
        0 => tau,
        n if n % 2 == 1 => big[n / 2],
        n => (big[n / 2 - 1] + big[n / 2]) / 2,
    };
    let mut out = Vec::new();
    for (id, seeds) in groups {
        let want = if seeds.len() >= tau { seeds.len() } else { target };
        for i in 0..want {
            out.push((id.clone(), seeds[i % seeds.len()]));
        }
    }
    out
}

fn c3_rebalancing() -> Outcome {
    ensure!(CollectConfig::default().tau == TAU, "default tau is {}", CollectConfig::default().tau);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut padded = 0;
    for profile in 0..200 {
        let mut batch = Vec::new();
        for j in 0..rng.gen_range(1..12) {
            for k in 0..rng.gen_range(0..25u64) {
                batch.push(stub(format!("template-{j:02}"), k, u8::from(rng.gen_bool(0.7))));
            }
        }
        batch.shuffle(&mut rng);
        let mut groups: BTreeMap<String, Vec<u64>> = BTreeMap::new();
        for t in batch.iter().filter(|t| t.ret == 1) {
            groups.entry(t.instance.template_id.clone()).or_default().push(t.instance.seed);
        }
        let mut d = OnlineDataset::new();
        d.extend(0, batch);
        ensure!(d.trajectories().all(|t| t.ret == 1), "profile {profile}: failure entered D_on");
        let Ok(out) = rebalance(&d, TAU, RebalanceRule::Median) else {
            ensure!(groups.is_empty(), "profile {profile}: unexpected error");
            continue;
        };
        let got: Vec<(String, u64)> =
            out.trajectories().map(|t| (t.instance.template_id.clone(), t.instance.seed)).collect();
        let want = brute_rebalance(&groups, TAU);
        ensure!(got == want, "profile {profile}: rebalance disagrees with brute force");
        ensure!(out.trajectories().all(|t| t.ret == 1), "profile {profile}: zero-return trajectory in output");
        padded += got.len().saturating_sub(d.len());
    }
    Ok(format!("200 profiles, tau {TAU}, {padded} padded copies"))
}

fn c4_broker_exactly_once() -> Outcome {
    let env = Arc::new(EnvSpec::standard());
    let ids: Vec<&'static str> = env.templates().iter().map(|t| t.id).collect();
    for rep in 0..20u64 {
        let broker = Arc::new(Broker::new(Arc::new(RandomPolicy), rep, Arc::new(TrajectoryStore::new())));
        let tickets: Vec<TaskTicket> = (0..200)
            .map(|k| TaskTicket {
                ticket_id: format!("rep{rep}-{k:03}"),
                template_id: ids[k % ids.len()].to_string(),
                seed: k as u64,
                temperature: 1.0,
                max_steps: 5,
                attempt: 0,
            })
            .collect();
        let expected: HashSet<String> = tickets.iter().map(|t| t.ticket_id.clone()).collect();
        broker.submit(tickets).map_err(|e| e.to_string())?;
        let networked = rep % 2 == 1;
        let server = if networked { Some(serve(Arc::clone(&broker), "127.0.0.1:0").map_err(|e| e.to_string())?) } else { None };
        let addr = server.as_ref().map(|s| s.addr().to_string());
        let reported: usize = thread::scope(|s| {
            let handles: Vec<_> = (0..4)
                .map(|w| {
                    let (broker, env, addr) = (Arc::clone(&broker), Arc::clone(&env), addr.clone());
                    s.spawn(move || {
                        let mut client: Box<dyn BrokerClient> = match addr {
                            Some(a) => Box::new(TcpClient::new(a)),
                            None => Box::new(LocalClient(broker)),
                        };
                        run_worker(&format!("w{w}"), client.as_mut(), &env).unwrap()
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).sum()
        });
        if let Some(s) = server {
            s.stop();
        }
        let deliveries = broker.deliveries();
        let mut seen = HashMap::new();
        for (ticket, _) in &deliveries {
            *seen.entry(ticket.clone()).or_insert(0) += 1;
        }
        ensure!(seen.len() == 200 && seen.values().all(|&n| n == 1), "rep {rep}: delivery counts {:?}", seen.len());
        ensure!(seen.keys().cloned().collect::<HashSet<_>>() == expected, "rep {rep}: wrong tickets delivered");
        ensure!(reported == 200 && broker.reported() == expected, "rep {rep}: {reported} reports acknowledged");
        let log = broker.processing_log();
        ensure!(
            log.len() as u64 == broker.arrivals() && log.iter().enumerate().all(|(i, &s)| s == i as u64),
            "rep {rep}: policy order differs from arrival order"
        );
    }
    Ok("20 repetitions x 200 tickets, 4 workers, half over TCP".into())
}

fn pipeline(variant: Variant, iterations: usize, seed: u64) -> Result<PipelineRunRecord, String> {
    let cfg = PipelineConfig { variant, iterations, ..Default::default() };
    run(&cfg, seed).map_err(|e| format!("{variant} seed {seed}: {e}"))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn c5_rft_trend() -> Outcome {
    let mut series: Vec<Vec<f64>> = Vec::new();
    for seed in PIPELINE_SEEDS {
        let r = pipeline(Variant::Full, TREND_ITERATIONS, seed)?;
        let mut s = vec![r.stage("sft").ok_or("no sft stage")?.online.overall.rate()];
        s.extend(r.rft_stages().iter().map(|st| st.online.overall.rate()));
        ensure!(s.len() == TREND_ITERATIONS + 1, "seed {seed}: {} stages", s.len());
        series.push(s);
    }
    let means: Vec<f64> = (0..=TREND_ITERATIONS).map(|i| mean(&series.iter().map(|s| s[i]).collect::<Vec<_>>())).collect();
    ensure!(means.windows(2).all(|w| w[1] >= w[0]), "mean success not monotone: {means:?}");
    let gap = means[TREND_ITERATIONS] - means[0];
    ensure!(gap >= TREND_GAP, "gap {gap:.3} below {TREND_GAP}");
    let shown: Vec<String> = means.iter().map(|m| format!("{:.1}", 100.0 * m)).collect();
    Ok(format!("mean online success {} (+{:.1}pp)", shown.join(" -> "), 100.0 * gap))
}

fn c6_ablation_ordering() -> Outcome {
    let mut online: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut idd: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for variant in Variant::ALL {
        for seed in PIPELINE_SEEDS {
            let r = pipeline(variant, TREND_ITERATIONS, seed)?;
            let result = r.result().ok_or("no result stage")?;
            online.entry(variant.as_str()).or_default().push(result.online.overall.rate());
            idd.entry(variant.as_str()).or_default().push(result.offline.accuracy(Split::Idd).unwrap_or(0.0));
        }
    }
    let on = |v: &str| mean(&online[v]);
    let off = |v: &str| mean(&idd[v]);
    ensure!(on("full") + ORDER_TOLERANCE >= on("rft-only"), "full {:.3} < rft-only {:.3}", on("full"), on("rft-only"));
    ensure!(on("rft-only") + ORDER_TOLERANCE >= on("awo"), "rft-only {:.3} < awo {:.3}", on("rft-only"), on("awo"));
    ensure!(off("full") >= off("rft-only"), "idd accuracy full {:.3} < rft-only {:.3}", off("full"), off("rft-only"));
    Ok(format!(
        "online full {:.1} / rft-only {:.1} / awo {:.1}; idd full {:.1} / rft-only {:.1}",
        100.0 * on("full"),
        100.0 * on("rft-only"),
        100.0 * on("awo"),
        100.0 * off("full"),
        100.0 * off("rft-only")
    ))
}

fn c7_divergence() -> Outcome {
    let r = pipeline(Variant::Full, TREND_ITERATIONS, DIVERGENCE_SEED)?;
    let env = EnvSpec::standard();
    let synth = rftforge_core::datapipe::synth_offline(&env, DIVERGENCE_SEED, &SynthConfig::default());
    for stage in &r.stages {
        let model = r.checkpoint(&stage.name).ok_or("missing checkpoint")?;
        let offline = eval_offline(model, &synth, MatchRule::Center).map_err(|e| e.to_string())?;
        let online = eval_online(model, &env, &r.config.eval_seeds, None).map_err(|e| e.to_string())?;
        ensure!(offline == stage.offline, "{}: recorded offline report not reproducible alone", stage.name);
        ensure!(online.overall == stage.online.overall, "{}: recorded online report not reproducible alone", stage.name);
    }
    let steps: Vec<String> = r
        .stages
        .windows(2)
        .filter(|w| {
            let acc = |i: usize| w[i].offline.accuracy(Split::Idd).unwrap_or(0.0);
            acc(1) < acc(0) && w[1].online.overall.rate() > w[0].online.overall.rate()
        })
        .map(|w| w[1].name.clone())
        .collect();
    ensure!(steps.iter().any(|s| s == DIVERGENCE_STAGE), "divergent stages {steps:?}, expected {DIVERGENCE_STAGE}");
    let st = r.stage(DIVERGENCE_STAGE).unwrap();
    Ok(format!(
        "seed {DIVERGENCE_SEED} at {DIVERGENCE_STAGE}: idd accuracy falls to {:.1} while online success rises to {:.1}",
        100.0 * st.offline.accuracy(Split::Idd).unwrap_or(0.0),
        100.0 * st.online.overall.rate()
    ))
}

fn random_screen(rng: &mut ChaCha8Rng) -> UiScreen {
    let n = rng.gen_range(1..8);
    let elements = (0..n)
        .map(|_| {
            let (l, t) = (rng.gen_range(0..60), rng.gen_range(0..60));
            let (r, b) = (rng.gen_range(l + 1..=64), rng.gen_range(t + 1..=64));
            UiElement::new("button", "x", BBox::new(l, t, r, b), true)
        })
        .collect();
    UiScreen::new("random", 64, 64, elements)
}

fn c8_relaxed_match() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut relaxed, mut strict) = (0, 0);
    for i in 0..1000 {
        let screen = random_screen(&mut rng);
        let n = screen.clickable_count();
        let (p, t) = (rng.gen_range(0..n), rng.gen_range(0..n));
        let (pb, tb) = (screen.clickable(p).unwrap().bbox, screen.clickable(t).unwrap().bbox);
        let centre = ((pb.left + pb.right) / 2, (pb.top + pb.bottom) / 2);
        let inside = (tb.left..tb.right).any(|x| (tb.top..tb.bottom).any(|y| (x, y) == centre));
        let (pa, ta) = if rng.gen_bool(0.5) {
            (Action::Click { target: p }, Action::Click { target: t })
        } else {
            (Action::LongPress { target: p }, Action::LongPress { target: t })
        };
        let got = action_match(&pa, &ta, &screen, MatchRule::Center);
        ensure!(got == inside, "pair {i}: match {got}, containment {inside}");
        let is_strict = action_match(&pa, &ta, &screen, MatchRule::Strict);
        ensure!(!is_strict || got, "pair {i}: strict match not relaxed");
        ensure!(!action_match(&pa, &ta, &screen, MatchRule::FullBox) || got, "pair {i}: full-box not within centre rule");
        relaxed += usize::from(got);
        strict += usize::from(is_strict);
    }
    Ok(format!("1000 pairs, {relaxed} relaxed matches, {strict} strict"))
}

fn c9_oracle_solvability() -> Outcome {
    let env = EnvSpec::standard();
    let oracle = OraclePolicy::new(&env);
    for template in env.templates() {
        for seed in 0..100 {
            let instance = env.instantiate(template.id, seed).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = run_episode(env.reset(&instance).unwrap(), |g, s, h| {
                Ok::<_, ()>(oracle.decide(g, s, h, 0.0, &mut rng))
            })
            .unwrap();
            ensure!(t.ret == 1, "{} seed {seed} failed", template.id);
            ensure!(
                t.step_count <= template.optimal_length,
                "{} seed {seed} took {} > {}",
                template.id,
                t.step_count,
                template.optimal_length
            );
        }
    }
    Ok(format!("{} templates x 100 seeds solved", env.templates().len()))
}

fn c10_difficulty_table() -> Outcome {
    let subset = DifficultyRow::new("Our Subset", 38, 28, 16);
    let full = DifficultyRow::new("Full Benchmark", 61, 36, 19);
    let cells = |r: &DifficultyRow| Difficulty::ALL.map(|d| r.cell(d));
    ensure!(cells(&subset) == ["38 (46.3%)", "28 (34.1%)", "16 (19.5%)"], "subset row {:?}", cells(&subset));
    ensure!(subset.total() == 82, "subset total {}", subset.total());
    ensure!(cells(&full) == ["61 (52.6%)", "36 (31.0%)", "19 (16.4%)"], "full row {:?}", cells(&full));
    ensure!(full.total() == 116, "full total {}", full.total());
    let registry = &difficulty_table(&EnvSpec::standard()).rows[0];
    ensure!(cells(registry) == ["6 (50.0%)", "4 (33.3%)", "2 (16.7%)"], "registry row {:?}", cells(registry));
    Ok("82-task and 116-task rows and the 12-template registry reproduced".into())
}

fn c11_determinism() -> Outcome {
    let a = pipeline(Variant::Full, 3, DETERMINISM_SEED)?;
    let b = pipeline(Variant::Full, 3, DETERMINISM_SEED)?;
    ensure!(a.to_text() == b.to_text(), "run records differ");
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    a.write(da.path()).map_err(|e| e.to_string())?;
    b.write(db.path()).map_err(|e| e.to_string())?;
    let mut files = 0;
    for entry in std::fs::read_dir(da.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let (x, y) = (std::fs::read(da.path().join(&name)).unwrap(), std::fs::read(db.path().join(&name)).unwrap());
        ensure!(x == y, "{name:?} differs between runs");
        files += 1;
    }
    ensure!(files == a.checkpoints.len() + 1, "{files} files written");
    Ok(format!("{files} files byte-identical across two runs"))
}
