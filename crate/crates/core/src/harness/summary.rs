//! Pooled episode and step statistics per environment and head variant.
//!
//! Standard deviations use the population convention (divide by `n`).
//! Improvements are `(learnable − classic) / |classic| × 100` on unrounded
//! means.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::{csv_error, load_eval_steps, EvalEpisode};
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::nn::HeadKind;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub env: EnvKind,
    pub variant: HeadKind,
    pub episodes: usize,
    pub steps: usize,
    pub episode_mean: f64,
    pub episode_std: f64,
    pub step_mean: f64,
    pub step_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Improvement {
    pub env: EnvKind,
    /// Percent change of the mean episode reward.
    pub episode_pct: f64,
    /// Percent change of the mean step reward.
    pub step_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
    pub improvements: Vec<Improvement>,
}

/// Population mean and standard deviation.
fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn improvement(learnable: f64, classic: f64) -> f64 {
    (learnable - classic) / classic.abs() * 100.0
}

/// Pools all episodes (and all their steps) per environment and variant.
/// Every environment present needs both variants.
pub fn summarise(stats: &[EvalEpisode]) -> Result<SummaryTable> {
    let mut envs: Vec<EnvKind> = Vec::new();
    for e in stats {
        if !envs.contains(&e.env) {
            envs.push(e.env);
        }
    }
    if envs.is_empty() {
        return Err(Error::MissingVariant(format!("{} and {}", HeadKind::Classic, HeadKind::Learnable)));
    }
    let mut table = SummaryTable { rows: Vec::new(), improvements: Vec::new() };
    for env in envs {
        let mut pair = Vec::with_capacity(2);
        for variant in HeadKind::ALL {
            let eps: Vec<&EvalEpisode> = stats.iter().filter(|e| e.env == env && e.variant == variant).collect();
            if eps.is_empty() {
                return Err(Error::MissingVariant(format!("{variant} on {env}")));
            }
            let (episode_mean, episode_std) = mean_std(eps.iter().map(|e| e.total));
            let (step_mean, step_std) = mean_std(eps.iter().flat_map(|e| e.rewards.iter().copied()));
            let row = SummaryRow {
                env,
                variant,
                episodes: eps.len(),
                steps: eps.iter().map(|e| e.rewards.len()).sum(),
                episode_mean,
                episode_std,
                step_mean,
                step_std,
            };
            pair.push(row.clone());
            table.rows.push(row);
        }
        let (c, l) = (&pair[0], &pair[1]);
        table.improvements.push(Improvement {
            env,
            episode_pct: improvement(l.episode_mean, c.episode_mean),
            step_pct: improvement(l.step_mean, c.step_mean),
        });
    }
    Ok(table)
}

impl SummaryTable {
    pub fn improvement(&self, env: EnvKind) -> Option<&Improvement> {
        self.improvements.iter().find(|i| i.env == env)
    }

    pub fn row(&self, env: EnvKind, variant: HeadKind) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.env == env && r.variant == variant)
    }

    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# mean ± std, population std (divide by n); improvement from unrounded means\n");
        let _ = writeln!(
            s,
            "{:<10} {:<12} {:>8} {:>9}  {:>24}  {:>22}",
            "env", "variant", "episodes", "steps", "episode reward", "step reward"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:<10} {:<12} {:>8} {:>9}  {:>24}  {:>22}",
                r.env.name(),
                r.variant.name(),
                r.episodes,
                r.steps,
                format!("{:.2} ± {:.2}", r.episode_mean, r.episode_std),
                format!("{:.4} ± {:.4}", r.step_mean, r.step_std),
            );
        }
        for i in &self.improvements {
            let _ = writeln!(
                s,
                "{:<10} {:<12} {:>8} {:>9}  {:>24}  {:>22}",
                i.env.name(),
                "improvement",
                "",
                "",
                format!("{:.2}%", i.episode_pct),
                format!("{:.2}%", i.step_pct),
            );
        }
        s
    }

    /// Writes `summary.csv` (one row per environment and variant) and
    /// `improvement.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join("summary.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| csv_error(&path, e))?;
        }
        w.flush()?;
        let path = dir.join("improvement.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        for i in &self.improvements {
            w.serialize(i).map_err(|e| csv_error(&path, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Summarises every `eval_steps_*.csv` in `dir` and writes `summary.txt`,
/// `summary.csv` and `improvement.csv` next to them.
pub fn summarise_dir(dir: &Path) -> Result<SummaryTable> {
    let mut inputs: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("eval_steps_") && n.ends_with(".csv"))
        })
        .collect();
    inputs.sort();
    let mut stats = Vec::new();
    for p in &inputs {
        stats.extend(load_eval_steps(p)?);
    }
    let table = summarise(&stats)?;
    std::fs::write(dir.join("summary.txt"), table.render_text())?;
    table.write_csv(dir)?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ep(env: EnvKind, variant: HeadKind, rewards: &[f64]) -> EvalEpisode {
        EvalEpisode {
            env,
            variant,
            train_seed: 0,
            trial_seed: 0,
            episode: 0,
            rewards: rewards.to_vec(),
            total: rewards.iter().sum(),
            steps: rewards.len(),
            trace: None,
        }
    }

    #[test]
    fn pooled_population_statistics() {
        let stats = vec![
            ep(EnvKind::Pendulum, HeadKind::Classic, &[1.0, 3.0]),
            ep(EnvKind::Pendulum, HeadKind::Classic, &[2.0]),
            ep(EnvKind::Pendulum, HeadKind::Learnable, &[6.0]),
        ];
        let t = summarise(&stats).unwrap();
        let c = t.row(EnvKind::Pendulum, HeadKind::Classic).unwrap();
        assert_eq!((c.episodes, c.steps), (2, 3));
        assert_eq!(c.episode_mean, 3.0);
        assert_eq!(c.episode_std, 1.0);
        assert_eq!(c.step_mean, 2.0);
        assert!((c.step_std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let i = t.improvement(EnvKind::Pendulum).unwrap();
        assert_eq!(i.episode_pct, 100.0);
        assert_eq!(i.step_pct, 200.0);
    }

    #[test]
    fn negative_baseline_uses_magnitude() {
        let stats = vec![
            ep(EnvKind::Pendulum, HeadKind::Learnable, &[-268.39]),
            ep(EnvKind::Pendulum, HeadKind::Classic, &[-269.20]),
        ];
        let t = summarise(&stats).unwrap();
        let pct = t.improvement(EnvKind::Pendulum).unwrap().episode_pct;
        assert!((pct - 0.3009).abs() < 1e-3, "{pct}");
        assert_eq!(t.rows[0].variant, HeadKind::Classic);
    }

    #[test]
    fn missing_variant_is_named() {
        let stats = vec![ep(EnvKind::Hetero2, HeadKind::Classic, &[1.0])];
        match summarise(&stats) {
            Err(Error::MissingVariant(v)) => assert_eq!(v, "learnable on hetero2"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(summarise(&[]), Err(Error::MissingVariant(_))));
    }

    #[test]
    fn identical_sets_give_zero_and_duplication_keeps_means() {
        let base = vec![
            ep(EnvKind::Hetero2, HeadKind::Classic, &[-1.0, -2.5]),
            ep(EnvKind::Hetero2, HeadKind::Classic, &[-0.5]),
            ep(EnvKind::Hetero2, HeadKind::Learnable, &[-1.0, -2.5]),
            ep(EnvKind::Hetero2, HeadKind::Learnable, &[-0.5]),
        ];
        let t = summarise(&base).unwrap();
        assert_eq!(t.improvement(EnvKind::Hetero2).unwrap().episode_pct, 0.0);
        let doubled: Vec<_> = base.iter().chain(&base).cloned().collect();
        let d = summarise(&doubled).unwrap();
        for (a, b) in t.rows.iter().zip(&d.rows) {
            assert!((a.episode_mean - b.episode_mean).abs() < 1e-12);
            assert!((a.step_mean - b.step_mean).abs() < 1e-12);
            assert!((a.episode_std - b.episode_std).abs() < 1e-12);
        }
    }

    #[test]
    fn text_and_csv_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let stats = vec![
            ep(EnvKind::Pendulum, HeadKind::Classic, &[-2.0]),
            ep(EnvKind::Pendulum, HeadKind::Learnable, &[-1.0]),
        ];
        let t = summarise(&stats).unwrap();
        let text = t.render_text();
        assert!(text.contains("population"));
        assert!(text.contains("50.00%"));
        t.write_csv(dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert!(csv.starts_with("env,variant,episodes,steps,episode_mean,episode_std,step_mean,step_std\n"));
        assert!(csv.contains("pendulum,learnable,1,1,-1.0,0.0,-1.0,0.0"));
    }
}
