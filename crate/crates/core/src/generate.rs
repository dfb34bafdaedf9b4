//! Seeded synthetic instances.
//!
//! Large instances are built around a planted schedule: activities are dealt
//! round-robin to teams, laid out on each team's timeline with a gap of at
//! least one minute, and the planted team is always compatible. Durations are
//! drawn uniformly from `[min_duration, max_duration]` and scaled down on a
//! team whose timeline would exceed `max_load` of the horizon.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Activity, Instance, Team};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "k")]
pub enum Injection {
    None,
    /// `k` more mutually overlapping tasks than the teams able to take them.
    Overload(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub horizon_hours: u32,
    pub n_teams: usize,
    pub n_activities: usize,
    pub compat_density: f64,
    pub same_pair_count: usize,
    pub injection: Injection,
    pub seed: u64,
    pub min_duration: i64,
    pub max_duration: i64,
    pub max_load: f64,
    /// Number of teams able to take the overload tasks.
    pub overload_width: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            horizon_hours: 24,
            n_teams: 20,
            n_activities: 100,
            compat_density: 0.5,
            same_pair_count: 0,
            injection: Injection::None,
            seed: 0,
            min_duration: 15,
            max_duration: 180,
            max_load: 0.7,
            overload_width: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("{0}")]
    Invalid(String),
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Invalid(m.to_string()));
        if self.horizon_hours == 0 {
            return bad("horizon_hours must be positive");
        }
        if !(self.compat_density > 0.0 && self.compat_density <= 1.0) {
            return bad("compat_density must lie in (0, 1]");
        }
        if self.n_teams == 0 && (self.n_activities > 0 || self.injection != Injection::None) {
            return bad("activities need at least one team");
        }
        if self.min_duration < 1 || self.max_duration < self.min_duration {
            return bad("durations must satisfy 1 <= min_duration <= max_duration");
        }
        if !(self.max_load > 0.0 && self.max_load <= 1.0) {
            return bad("max_load must lie in (0, 1]");
        }
        let horizon = self.horizon_minutes();
        let per_team = self.n_activities.div_ceil(self.n_teams.max(1)) as i64;
        if per_team * 2 > (horizon as f64 * self.max_load) as i64 {
            return bad("too many activities per team for the horizon");
        }
        if self.same_pair_count > 0 && per_team < 2 {
            return bad("same pairs need at least two activities on some team");
        }
        if let Injection::Overload(k) = self.injection {
            if k == 0 {
                return bad("overload(k) needs k >= 1");
            }
            if self.overload_width == 0 {
                return bad("overload_width must be positive");
            }
        }
        Ok(())
    }

    pub fn horizon_minutes(&self) -> i64 {
        self.horizon_hours as i64 * 60
    }
}

struct Draft {
    start: i64,
    end: i64,
    planted: usize,
    /// Only these teams may take the activity (overload tasks).
    restricted: Option<Vec<usize>>,
}

pub fn generate_instance(cfg: &GenConfig) -> Result<Instance, GenError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let horizon = cfg.horizon_minutes();
    let n_teams = cfg.n_teams;
    let mut drafts: Vec<Draft> = Vec::with_capacity(cfg.n_activities);

    let mut per_team: Vec<Vec<usize>> = vec![Vec::new(); n_teams];
    for i in 0..cfg.n_activities {
        per_team[i % n_teams].push(i);
    }
    for (team, acts) in per_team.iter().enumerate() {
        let c = acts.len() as i64;
        if c == 0 {
            continue;
        }
        let mut durations: Vec<i64> = (0..c).map(|_| rng.random_range(cfg.min_duration..=cfg.max_duration)).collect();
        let budget = (horizon as f64 * cfg.max_load) as i64 - c;
        let total: i64 = durations.iter().sum();
        if total > budget {
            for d in durations.iter_mut() {
                *d = (*d * budget / total).max(1);
            }
        }
        // Rounding up to one minute can still overflow on crowded teams.
        while durations.iter().sum::<i64>() + (c - 1) > horizon {
            let longest = (0..durations.len()).max_by_key(|&i| durations[i]).expect("non-empty");
            if durations[longest] == 1 {
                break;
            }
            durations[longest] -= 1;
        }
        let used: i64 = durations.iter().sum::<i64>() + (c - 1);
        let slack = horizon - used;
        let mut cuts: Vec<i64> = (0..c).map(|_| rng.random_range(0..=slack)).collect();
        cuts.sort_unstable();
        let mut t = 0;
        let mut prev_cut = 0;
        for (k, d) in durations.iter().enumerate() {
            t += cuts[k] - prev_cut;
            prev_cut = cuts[k];
            drafts.push(Draft { start: t, end: t + d, planted: team, restricted: None });
            t += d + 1;
        }
    }

    if let Injection::Overload(k) = cfg.injection {
        let width = cfg.overload_width.min(n_teams);
        let mut teams: Vec<usize> = (0..n_teams).collect();
        teams.shuffle(&mut rng);
        teams.truncate(width);
        teams.sort_unstable();
        let t0 = rng.random_range(0..horizon);
        let overload: Vec<Draft> = (0..width + k as usize)
            .map(|_| {
                let before = rng.random_range(0..=cfg.max_duration / 2).min(t0);
                let after = rng.random_range(1..=cfg.max_duration / 2).min(horizon - t0);
                Draft { start: t0 - before, end: t0 + after, planted: teams[0], restricted: Some(teams.clone()) }
            })
            .collect();
        // Clear the window on the chosen teams so that dropping any k overload
        // tasks leaves a feasible problem.
        let lo = overload.iter().map(|d| d.start).min().expect("width >= 1");
        let hi = overload.iter().map(|d| d.end).max().expect("width >= 1");
        drafts.retain(|d| !(teams.contains(&d.planted) && d.start <= hi && d.end >= lo));
        drafts.extend(overload);
    }

    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by_key(|&i| (drafts[i].start, drafts[i].end, drafts[i].planted, i));
    let width = drafts.len().saturating_sub(1).to_string().len().max(3);
    let team_width = n_teams.saturating_sub(1).to_string().len().max(2);
    let teams: Vec<Team> = (0..n_teams).map(|w| Team::new(format!("t{w:0team_width$}"))).collect();
    let activities: Vec<Activity> = order
        .iter()
        .enumerate()
        .map(|(pos, &i)| Activity::new(format!("a{pos:0width$}"), drafts[i].start, drafts[i].end))
        .collect();
    let mut compat = vec![false; activities.len() * n_teams];
    for (pos, &i) in order.iter().enumerate() {
        let d = &drafts[i];
        for w in 0..n_teams {
            compat[pos * n_teams + w] = match &d.restricted {
                Some(allowed) => allowed.contains(&w),
                None => w == d.planted || rng.random_bool(cfg.compat_density),
            };
        }
    }

    let mut same_pairs = Vec::new();
    if cfg.same_pair_count > 0 {
        let mut by_team: Vec<Vec<usize>> = vec![Vec::new(); n_teams];
        for (pos, &i) in order.iter().enumerate() {
            if drafts[i].restricted.is_none() {
                by_team[drafts[i].planted].push(pos);
            }
        }
        let candidates: Vec<usize> = (0..n_teams).filter(|&w| by_team[w].len() >= 2).collect();
        let mut seen = std::collections::BTreeSet::new();
        let mut attempts = 0;
        while same_pairs.len() < cfg.same_pair_count && attempts < cfg.same_pair_count * 20 {
            attempts += 1;
            let w = candidates[rng.random_range(0..candidates.len())];
            let pool = &by_team[w];
            let x = pool[rng.random_range(0..pool.len())];
            let y = pool[rng.random_range(0..pool.len())];
            if x != y && seen.insert((x.min(y), x.max(y))) {
                same_pairs.push((activities[x.min(y)].id.clone(), activities[x.max(y)].id.clone()));
            }
        }
    }

    Ok(Instance { activities, teams, compat, same_pairs, horizon_hours: cfg.horizon_hours })
}

/// Knobs for small random instances (oracle-sized).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallConfig {
    pub max_activities: usize,
    pub max_teams: usize,
    /// Activities start in `[0, span)`.
    pub span: i64,
    pub max_duration: i64,
    pub compat_density: f64,
    pub same_pair_prob: f64,
}

impl Default for SmallConfig {
    fn default() -> Self {
        SmallConfig { max_activities: 8, max_teams: 4, span: 60, max_duration: 25, compat_density: 0.75, same_pair_prob: 0.2 }
    }
}

/// A small instance with dense overlaps; teams and activities are both non-empty.
pub fn random_small_instance(cfg: &SmallConfig, seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=cfg.max_activities);
    let m = rng.random_range(1..=cfg.max_teams);
    let activities: Vec<Activity> = (0..n)
        .map(|i| {
            let s = rng.random_range(0..cfg.span);
            Activity::new(format!("a{}", i + 1), s, s + rng.random_range(1..=cfg.max_duration))
        })
        .collect();
    let teams: Vec<Team> = (0..m).map(|w| Team::new(format!("t{}", w + 1))).collect();
    let compat = (0..n * m).map(|_| rng.random_bool(cfg.compat_density)).collect();
    let mut same_pairs = Vec::new();
    if n >= 2 && rng.random_bool(cfg.same_pair_prob) {
        let x = rng.random_range(0..n);
        let y = (x + rng.random_range(1..n)) % n;
        same_pairs.push((activities[x].id.clone(), activities[y].id.clone()));
    }
    Instance { activities, teams, compat, same_pairs, horizon_hours: 1 }
}

/// `n` independent blocks, each holding `teams + 1` copies of one interval on `teams` teams.
pub fn independent_pigeonholes(blocks: usize, teams: usize) -> Instance {
    let mut activities = Vec::new();
    for b in 0..blocks {
        for c in 0..=teams {
            let start = b as i64 * 100;
            activities.push(Activity::new(format!("b{}c{}", b + 1, c + 1), start, start + 10));
        }
    }
    Instance::fully_compatible(activities, (1..=teams).map(|w| Team::new(format!("t{w}"))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{conflicting, validate_instance};

    #[test]
    fn planted_schedule_is_valid_and_feasible() {
        let cfg = GenConfig { horizon_hours: 6, n_activities: 50, compat_density: 1.0, seed: 7, ..GenConfig::default() };
        let inst = generate_instance(&cfg).unwrap();
        assert!(validate_instance(&inst).is_valid());
        assert_eq!(inst.activities.len(), 50);
        assert!(inst.activities.iter().all(|a| a.start >= 0 && a.end <= 360));
    }

    #[test]
    fn planted_timelines_do_not_clash() {
        let cfg = GenConfig { n_activities: 300, compat_density: 0.2, seed: 3, ..GenConfig::default() };
        let inst = generate_instance(&cfg).unwrap();
        // Each activity keeps at least one compatible team.
        for a in 0..inst.activities.len() {
            assert!(inst.compatible_teams(a).next().is_some());
        }
        // The compatible-team count is at least one per row and the instance is well formed.
        assert!(validate_instance(&inst).is_valid());
    }

    #[test]
    fn overload_tasks_share_an_instant() {
        let cfg = GenConfig {
            n_teams: 2,
            n_activities: 6,
            horizon_hours: 6,
            injection: Injection::Overload(1),
            seed: 11,
            ..GenConfig::default()
        };
        let inst = generate_instance(&cfg).unwrap();
        assert_eq!(crate::oracle::brute_force_optimal(&inst).unwrap(), None);
        let feasible = generate_instance(&GenConfig { injection: Injection::None, ..cfg }).unwrap();
        assert!(crate::oracle::brute_force_optimal(&feasible).unwrap().is_some());
    }

    #[test]
    fn dropping_an_overload_task_restores_feasibility() {
        for seed in 0..10 {
            let cfg = GenConfig {
                n_teams: 4,
                n_activities: 6,
                horizon_hours: 6,
                compat_density: 1.0,
                overload_width: 2,
                injection: Injection::Overload(1),
                seed,
                ..GenConfig::default()
            };
            let inst = generate_instance(&cfg).unwrap();
            let restricted: Vec<usize> =
                (0..inst.activities.len()).filter(|&a| inst.compatible_teams(a).count() == 2).collect();
            assert_eq!(restricted.len(), 3);
            assert_eq!(crate::oracle::brute_force_optimal(&inst).unwrap(), None);
            for &r in &restricted {
                let mut rest = inst.clone();
                rest.activities.remove(r);
                rest.compat.drain(r * 4..(r + 1) * 4);
                assert!(crate::oracle::brute_force_optimal(&rest).unwrap().is_some(), "seed {seed} drop {r}");
            }
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let cfg = GenConfig { same_pair_count: 4, seed: 5, ..GenConfig::default() };
        assert_eq!(generate_instance(&cfg).unwrap(), generate_instance(&cfg).unwrap());
        let other = GenConfig { seed: 6, ..cfg.clone() };
        assert_ne!(generate_instance(&cfg).unwrap(), generate_instance(&other).unwrap());
        assert_eq!(generate_instance(&cfg).unwrap().same_pairs.len(), 4);
    }

    #[test]
    fn zero_activities_is_empty() {
        let inst = generate_instance(&GenConfig { n_activities: 0, ..GenConfig::default() }).unwrap();
        assert!(inst.activities.is_empty());
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            GenConfig { compat_density: 0.0, ..GenConfig::default() },
            GenConfig { compat_density: 1.5, ..GenConfig::default() },
            GenConfig { n_teams: 0, ..GenConfig::default() },
            GenConfig { horizon_hours: 1, n_teams: 1, n_activities: 100, ..GenConfig::default() },
            GenConfig { injection: Injection::Overload(0), ..GenConfig::default() },
        ] {
            assert!(generate_instance(&cfg).is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn pigeonhole_blocks_are_independent() {
        let inst = independent_pigeonholes(2, 2);
        assert_eq!(inst.activities.len(), 6);
        assert!(!conflicting(&inst.activities[0], &inst.activities[3], false));
    }
}
