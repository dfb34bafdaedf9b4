//! Acceptance suite. Runs every criterion in sequence inside one test so
//! timing-based checks do not compete with each other for the CPU, prints
//! one PASS/FAIL line per criterion, then fails if any criterion failed.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::time::{Duration, Instant};

use crewplan_core::encode::{encode, ConstraintKind, ConstraintLabel, EncodeConfig, LabeledFormula, OverrideMode};
use crewplan_core::explain::{find_mcs, find_mus, ExplainOptions};
use crewplan_core::generate::{
    generate_instance, independent_pigeonholes, random_small_instance, GenConfig, SmallConfig,
};
use crewplan_core::harness::{run_explain_benchmark, ExplainBenchConfig};
use crewplan_core::model::{team_equivalence_classes, Activity, Instance, Team};
use crewplan_core::optimize::{minimize_used_teams, minimize_used_teams_with, Minimized, OptimizeOptions};
use crewplan_core::oracle::{brute_force_optimal, Oracle};
use crewplan_core::sat::{solve, Budget};
use crewplan_core::session::{check_gantt, Event, GanttData, Mode, Session, SessionConfig, SessionError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Suite {
    results: Vec<(String, bool, String)>,
    gantt_views: usize,
    gantt_problems: Vec<String>,
    logs: Vec<(Instance, SessionConfig, Vec<Event>, serde_json::Value)>,
}

impl Suite {
    fn record(&mut self, name: &str, pass: bool, detail: String) {
        // Written to the stdout handle directly so the line shows without --nocapture.
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((name.to_string(), pass, detail));
    }

    /// Draws `allocation` and checks it; `unallocated` must be exactly the Unset row.
    fn gantt(&mut self, inst: &Instance, allocation: &BTreeMap<String, String>, unallocated: &[String], strict: bool) {
        let g = GanttData::build(inst, allocation, vec![]);
        self.check_view(&g, inst, unallocated, strict);
    }

    fn check_view(&mut self, g: &GanttData, inst: &Instance, unallocated: &[String], strict: bool) {
        self.gantt_views += 1;
        self.gantt_problems.extend(check_gantt(g, inst, strict));
        let unset: BTreeSet<&str> = g.unset().iter().map(|e| e.activity.as_str()).collect();
        let expected: BTreeSet<&str> = unallocated.iter().map(String::as_str).collect();
        if unset != expected || g.unset().len() != unallocated.len() {
            self.gantt_problems.push(format!("Unset row {unset:?} differs from unallocated {expected:?}"));
        }
    }

    /// Checks the session's current view and remembers its event log.
    fn session_view(&mut self, s: &mut Session) {
        let g = match s.gantt_view() {
            Ok(g) => g,
            Err(e) => {
                self.gantt_problems.push(format!("no Gantt view in mode {:?}: {e}", s.mode));
                return;
            }
        };
        let unallocated = match s.mode {
            Mode::PriorityTuning => s.last_relaxed.as_ref().map(|r| r.unallocated.clone()),
            _ => s.last_solution.as_ref().filter(|x| x.objective.is_some()).map(|x| x.unallocated.clone()),
        };
        // Without a stored solution the view is a fresh maximum allocation; its
        // Unset row is whatever it leaves out.
        let unallocated = unallocated.unwrap_or_else(|| g.unset().iter().map(|e| e.activity.clone()).collect());
        let inst = s.instance.clone();
        self.check_view(&g, &inst, &unallocated, s.config.encode.strict_touch);
    }

    fn keep_log(&mut self, s: &Session) {
        self.logs.push((s.instance.clone(), s.config.clone(), s.events(), s.canonical()));
    }
}

fn copies(n: usize, teams: usize) -> Instance {
    Instance::fully_compatible(
        (1..=n).map(|i| Activity::new(format!("a{i}"), 0, 10)).collect(),
        (1..=teams).map(|w| Team::new(format!("t{w}"))).collect(),
    )
}

fn sat_under(f: &LabeledFormula, enforced: &BTreeSet<ConstraintLabel>) -> bool {
    let gids: Vec<usize> = enforced.iter().map(|l| f.group_of(l).expect("label encoded")).collect();
    let out = solve(f, &f.assumptions_for(gids), Budget::unlimited()).expect("solver runs");
    assert_ne!(out.status, crewplan_core::sat::Status::Timeout);
    out.is_sat()
}

fn subsets<T: Clone>(items: &[T]) -> impl Iterator<Item = Vec<T>> + '_ {
    (0u32..1 << items.len()).map(move |bits| {
        items.iter().enumerate().filter(|(i, _)| bits >> i & 1 == 1).map(|(_, x)| x.clone()).collect()
    })
}

fn oracle_equivalence(suite: &mut Suite) {
    let cfg = SmallConfig { max_activities: 10, max_teams: 4, ..SmallConfig::default() };
    let t0 = Instant::now();
    let mut mismatches = Vec::new();
    let mut infeasible = 0;
    for seed in 0..500 {
        let inst = random_small_instance(&cfg, seed);
        let expected = brute_force_optimal(&inst).expect("oracle runs");
        let f = encode(&inst, &EncodeConfig::default()).expect("encodes");
        let res = minimize_used_teams(&f, Budget::unlimited()).expect("optimizes");
        let got = match &res {
            Minimized::Solved(s) if s.proven_optimal => Some(s.objective),
            Minimized::Infeasible { .. } => None,
            other => {
                mismatches.push(format!("seed {seed}: unexpected {other:?}"));
                continue;
            }
        };
        if got != expected {
            mismatches.push(format!("seed {seed}: got {got:?}, oracle {expected:?}"));
        }
        match res.solution() {
            Some(s) => suite.gantt(&inst, &s.allocation, &s.unallocated, false),
            None => infeasible += 1,
        }
    }
    let elapsed = t0.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(300);
    suite.record(
        "oracle equivalence",
        pass,
        format!("500 instances ({infeasible} infeasible), {} mismatches, {:.1} s {:?}", mismatches.len(), elapsed.as_secs_f64(), mismatches.first()),
    );
}

/// Seeded infeasible instances with at most six soft labels whose soft part
/// alone is responsible for the conflict.
fn infeasible_family(count: usize) -> Vec<(Instance, EncodeConfig)> {
    let small = SmallConfig { max_activities: 6, max_teams: 3, span: 30, max_duration: 20, compat_density: 0.7, same_pair_prob: 0.4 };
    let kinds = [
        vec![ConstraintKind::TaskAllocated],
        vec![ConstraintKind::TaskAllocated, ConstraintKind::SamePair],
        vec![ConstraintKind::TaskAllocated, ConstraintKind::Compatibility],
        vec![ConstraintKind::Overlap],
    ];
    let mut out = Vec::new();
    let mut seed = 0;
    while out.len() < count {
        let inst = random_small_instance(&small, seed);
        let cfg = EncodeConfig { soft_kinds: kinds[seed as usize % kinds.len()].iter().copied().collect(), ..EncodeConfig::default() };
        seed += 1;
        let f = encode(&inst, &cfg).expect("encodes");
        let soft: BTreeSet<ConstraintLabel> = f.soft_labels().into_iter().collect();
        if soft.is_empty() || soft.len() > 6 || sat_under(&f, &soft) || !sat_under(&f, &BTreeSet::new()) {
            continue;
        }
        out.push((inst, cfg));
    }
    out
}

fn mus_correctness(suite: &mut Suite, family: &[(Instance, EncodeConfig)]) {
    let mut failures = Vec::new();
    for (i, (inst, cfg)) in family.iter().enumerate() {
        let f = encode(inst, cfg).unwrap();
        let mus = find_mus(&f, &f.soft_labels(), Budget::unlimited(), &ExplainOptions::default()).expect("mus");
        let set: BTreeSet<ConstraintLabel> = mus.labels.iter().cloned().collect();
        let mut ok = mus.minimal && !set.is_empty() && !sat_under(&f, &set);
        for l in &set {
            let mut without = set.clone();
            without.remove(l);
            ok &= sat_under(&f, &without);
        }
        let oracle = Oracle::new(inst, cfg, &[]).unwrap();
        ok &= oracle.all_muses().unwrap().contains(&set);
        if !ok {
            failures.push(i);
        }
    }
    suite.record("MUS correctness", failures.is_empty(), format!("{}/{} pass {failures:?}", family.len() - failures.len(), family.len()));
}

fn mcs_correctness(suite: &mut Suite, family: &[(Instance, EncodeConfig)]) {
    let mut failures = Vec::new();
    let mut hits = 0;
    for (i, (inst, cfg)) in family.iter().enumerate() {
        let f = encode(inst, cfg).unwrap();
        let soft: BTreeSet<ConstraintLabel> = f.soft_labels().into_iter().collect();
        let mcs = find_mcs(&f, &f.soft_labels(), Budget::unlimited(), &ExplainOptions::default()).expect("mcs");
        let set: BTreeSet<ConstraintLabel> = mcs.labels.iter().cloned().collect();
        let complement: BTreeSet<ConstraintLabel> = soft.difference(&set).cloned().collect();
        let mut ok = mcs.minimal && !set.is_empty() && sat_under(&f, &complement);
        let members: Vec<ConstraintLabel> = set.iter().cloned().collect();
        for sub in subsets(&members).filter(|s| s.len() < members.len()) {
            let mut enforced = complement.clone();
            enforced.extend(members.iter().filter(|l| !sub.contains(l)).cloned());
            ok &= !sat_under(&f, &enforced);
        }
        let oracle = Oracle::new(inst, cfg, &[]).unwrap();
        ok &= oracle.all_mcses().unwrap().contains(&set);
        for mus in oracle.all_muses().unwrap() {
            hits += 1;
            ok &= !mus.is_disjoint(&set);
        }
        if !ok {
            failures.push(i);
        }
    }
    suite.record(
        "MCS correctness",
        failures.is_empty(),
        format!("{}/{} pass, {hits} MUS hit checks {failures:?}", family.len() - failures.len(), family.len()),
    );
}

fn toggle_invariance(suite: &mut Suite) {
    let densities = [1.0, 0.8, 0.5];
    let mut deviations = Vec::new();
    let mut runs = 0;
    let mut class_checks = 0;
    for hours in [6u32, 8, 24] {
        for seed in 0..50u64 {
            let inst = generate_instance(&GenConfig {
                horizon_hours: hours,
                n_teams: 8,
                n_activities: hours as usize * 4,
                compat_density: densities[seed as usize % densities.len()],
                seed,
                ..GenConfig::default()
            })
            .expect("generates");
            let classes = team_equivalence_classes(&inst);
            let mut objectives = BTreeSet::new();
            for (clique, symmetry) in [(true, true), (true, false), (false, true), (false, false)] {
                let cfg = EncodeConfig { clique, symmetry, ..EncodeConfig::default() };
                let f = encode(&inst, &cfg).unwrap();
                let res = minimize_used_teams(&f, Budget::new(Duration::from_secs(30))).unwrap();
                runs += 1;
                let Some(s) = res.solution().filter(|s| s.proven_optimal) else {
                    deviations.push(format!("{hours}h seed {seed} {clique}/{symmetry}: not proven"));
                    continue;
                };
                objectives.insert(s.objective);
                suite.gantt(&inst, &s.allocation, &s.unallocated, false);
                if symmetry {
                    for class in &classes.classes {
                        class_checks += 1;
                        let used: Vec<bool> = class.iter().map(|t| s.used_teams.contains(t)).collect();
                        if used.windows(2).any(|w| !w[0] && w[1]) {
                            deviations.push(format!("{hours}h seed {seed}: class {class:?} used {used:?}"));
                        }
                    }
                }
            }
            if objectives.len() > 1 {
                deviations.push(format!("{hours}h seed {seed}: objectives {objectives:?}"));
            }
        }
    }
    suite.record(
        "toggle invariance",
        deviations.is_empty(),
        format!("{runs} runs, {class_checks} class checks, {} deviations {:?}", deviations.len(), deviations.first()),
    );
}

fn scale(suite: &mut Suite) {
    let mut proven = 0;
    let mut slowest = 0.0f64;
    for seed in 0..20 {
        let inst = generate_instance(&GenConfig { horizon_hours: 24, n_activities: 300, n_teams: 20, seed, ..GenConfig::default() })
            .expect("generates");
        let f = encode(&inst, &EncodeConfig::default()).unwrap();
        let t0 = Instant::now();
        let res = minimize_used_teams_with(&f, &f.relax([]).unwrap(), Budget::new(Duration::from_secs(30)), &OptimizeOptions::default())
            .unwrap();
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        if let Some(s) = res.solution() {
            proven += usize::from(s.proven_optimal);
            suite.gantt(&inst, &s.allocation, &s.unallocated, false);
        }
    }
    suite.record("scale", proven >= 18, format!("{proven}/20 proven optimal within 30 s, slowest {slowest:.2} s"));
}

fn explanation_trend(suite: &mut Suite) {
    let rep = run_explain_benchmark(&ExplainBenchConfig { iterations: false, ..ExplainBenchConfig::default() }).expect("benchmark runs");
    let _ = write!(std::io::stdout().lock(), "{}", rep.to_table());
    let times: Vec<f64> = rep.rows.iter().map(|r| r.mean_time).collect();
    let pass = rep.rows.len() == 3
        && times.windows(2).all(|w| w[0] <= w[1])
        && rep.size_spread() < 0.5
        && rep.rows.iter().all(|r| r.all_minimal);
    suite.record(
        "explanation trend",
        pass,
        format!("mean times {times:?} s, size spread {:.2}", rep.size_spread()),
    );
}

fn start(inst: Instance) -> Session {
    Session::start(inst, SessionConfig::default()).expect("session starts")
}

fn restoration(suite: &mut Suite) {
    let mut notes = Vec::new();

    let mut s = start(independent_pigeonholes(2, 2));
    suite.session_view(&mut s);
    let mut steps = 0;
    if s.begin_local_resolution().is_ok() {
        while s.mode == Mode::LocalResolution && steps < 10 {
            let label = s.last_conflict.as_ref().unwrap().explanation.label_set()[0].clone();
            s.resolve_local(&label).unwrap();
            steps += 1;
            suite.session_view(&mut s);
        }
    }
    let local_ok = s.mode == Mode::Feasible && steps == 2;
    notes.push(format!("local: {steps} steps, {:?}", s.mode));
    suite.keep_log(&s);

    let mut s = start(copies(5, 2));
    let mcs = s.begin_global_resolution().unwrap().explanation.label_set();
    suite.session_view(&mut s);
    s.accept_corrections(&mcs[..1]).unwrap();
    suite.session_view(&mut s);
    let rest: Vec<ConstraintLabel> = s.last_conflict.as_ref().map(|c| c.explanation.label_set()).unwrap_or_default();
    s.accept_corrections(&rest).unwrap();
    suite.session_view(&mut s);
    let recomputations = s.history.iter().filter(|h| h.outcome.recomputed).count();
    let global_ok = mcs.len() > 1 && recomputations == 1 && s.mode == Mode::Feasible;
    notes.push(format!("global: {recomputations} recomputation, {:?}", s.mode));
    suite.keep_log(&s);

    let mut s = start(copies(3, 2));
    let first = s.tune_priorities(BTreeMap::new()).unwrap().clone();
    suite.session_view(&mut s);
    let unset = first.unallocated.first().cloned().unwrap_or_default();
    let second = s.tune_priorities([(unset.clone(), 5)].into()).unwrap().clone();
    suite.session_view(&mut s);
    let oracle = Oracle::new(&s.instance, &s.effective_encode_config(), &[]).unwrap();
    let weights: Vec<u64> = s.instance.activities.iter().map(|a| s.priorities.get(&a.id)).collect();
    let (best, sets) = oracle.max_weight(&weights);
    let allocated: BTreeSet<usize> = s.instance.activities.iter().enumerate().filter(|(_, a)| second.allocation.contains_key(&a.id)).map(|(i, _)| i).collect();
    let flip_ok = first.unallocated.len() == 1
        && second.allocation.contains_key(&unset)
        && second.allocated_weight == best
        && sets.contains(&allocated)
        && sets.iter().all(|set| set.contains(&s.instance.activity_index(&unset).unwrap()));
    s.accept_relaxed_solution().unwrap();
    suite.session_view(&mut s);
    notes.push(format!("priority: {unset} allocated {}, weight {} of best {best}", second.allocation.contains_key(&unset), second.allocated_weight));
    suite.keep_log(&s);

    suite.record("restoration workflows", local_ok && global_ok && flip_ok, notes.join("; "));
}

/// Random legal-looking operations on random sessions; rejected operations
/// must leave the state untouched.
fn random_walks(suite: &mut Suite) -> Vec<String> {
    let mut problems = Vec::new();
    let small = SmallConfig { max_activities: 7, max_teams: 3, span: 40, ..SmallConfig::default() };
    for seed in 0..40u64 {
        let inst = random_small_instance(&small, 1000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = start(inst);
        suite.session_view(&mut s);
        for _ in 0..12 {
            let acts: Vec<String> = s.instance.activities.iter().map(|a| a.id.clone()).collect();
            let teams: Vec<String> = s.instance.teams.iter().map(|t| t.id.clone()).collect();
            let conflict = s.last_conflict.as_ref().map(|c| c.explanation.label_set()).unwrap_or_default();
            let override_event = |rng: &mut ChaCha8Rng| Event::ApplyOverride {
                activity: acts[rng.random_range(0..acts.len())].clone(),
                team: teams[rng.random_range(0..teams.len())].clone(),
                mode: if rng.random_bool(0.5) { OverrideMode::Force } else { OverrideMode::Forbid },
            };
            let event = match (s.mode, rng.random_range(0..4)) {
                (_, 0) => Event::Solve,
                (Mode::Feasible, _) => override_event(&mut rng),
                (Mode::Infeasible, 1) => Event::BeginLocalResolution,
                (Mode::Infeasible, 2) => Event::BeginGlobalResolution,
                (Mode::Infeasible, _) | (Mode::PriorityTuning, 1) => {
                    let mut weights = BTreeMap::new();
                    for a in &acts {
                        if rng.random_bool(0.3) {
                            weights.insert(a.clone(), rng.random_range(1..6));
                        }
                    }
                    Event::TunePriorities { weights }
                }
                (Mode::LocalResolution, _) if !conflict.is_empty() => {
                    Event::ResolveLocal { label: conflict[rng.random_range(0..conflict.len())].key() }
                }
                (Mode::GlobalResolution, _) => Event::AcceptCorrections {
                    labels: conflict.iter().filter(|_| rng.random_bool(0.6)).map(|l| l.key()).collect(),
                },
                (Mode::PriorityTuning, _) => Event::AcceptRelaxedSolution,
                _ => override_event(&mut rng),
            };
            let before = s.clone();
            match s.apply(event.clone()) {
                Ok(()) => suite.session_view(&mut s),
                Err(SessionError::BudgetExceeded) => problems.push(format!("walk {seed}: budget exceeded on {event:?}")),
                Err(_) if s == before => {}
                Err(e) => problems.push(format!("walk {seed}: failed {event:?} ({e}) changed the state")),
            }
        }
        suite.keep_log(&s);
    }
    problems
}

fn replay_determinism(suite: &mut Suite, walk_problems: Vec<String>) {
    let mut problems = walk_problems;
    for (i, (inst, cfg, events, canonical)) in suite.logs.iter().enumerate() {
        match Session::replay(inst.clone(), cfg.clone(), events) {
            Ok(s) if s.canonical() == *canonical => {}
            Ok(_) => problems.push(format!("log {i} replays to a different state")),
            Err(e) => problems.push(format!("log {i} fails to replay: {e}")),
        }
    }
    let events: usize = suite.logs.iter().map(|l| l.2.len()).sum();
    suite.record(
        "replay determinism",
        problems.is_empty(),
        format!("{} logs, {events} events, {} problems {:?}", suite.logs.len(), problems.len(), problems.first()),
    );
}

#[test]
fn acceptance() {
    let mut suite = Suite { results: Vec::new(), gantt_views: 0, gantt_problems: Vec::new(), logs: Vec::new() };
    explanation_trend(&mut suite);
    scale(&mut suite);
    oracle_equivalence(&mut suite);
    let family = infeasible_family(100);
    mus_correctness(&mut suite, &family);
    mcs_correctness(&mut suite, &family);
    toggle_invariance(&mut suite);
    restoration(&mut suite);
    let walk_problems = random_walks(&mut suite);
    replay_determinism(&mut suite, walk_problems);
    let problems = std::mem::take(&mut suite.gantt_problems);
    suite.record(
        "Gantt soundness",
        problems.is_empty(),
        format!("{} views, {} violations {:?}", suite.gantt_views, problems.len(), problems.first()),
    );
    let failed: Vec<&str> = suite.results.iter().filter(|r| !r.1).map(|r| r.0.as_str()).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
