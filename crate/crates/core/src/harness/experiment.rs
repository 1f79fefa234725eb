//! Turns a config into concrete tasks and selectors.

use std::fs;

use crate::environments::{
    make_cartpole_env, make_gridworld_env, make_maze_env, move_start, parse_grid_layout, shrink_maze,
    CartPoleParams, DiscretizerSpec, GridLayout, Region,
};
use crate::mdp::Environment;
use crate::selectors::{ActiveLtms, ActiveRmgs, Fixed, Ltms, Rmgs, Selector, TaskFeatures};

use super::config::{Domain, ExperimentConfig, GridDomain, GridSource, SelectorKind};
use super::HarnessError;

/// The task family of one experiment: K sources and the target.
#[derive(Clone)]
pub struct Experiment {
    pub sources: Vec<Box<dyn Environment>>,
    pub target: Box<dyn Environment>,
    /// Selector features; `None` when there are no sources.
    pub features: Option<TaskFeatures>,
}

fn read_layout(cfg: &ExperimentConfig, path: &std::path::Path) -> Result<GridLayout, HarnessError> {
    let full = cfg.resolve(path);
    let text = fs::read_to_string(&full).map_err(|e| HarnessError::Io {
        path: full.clone(),
        source: e,
    })?;
    parse_grid_layout(&text).map_err(|e| HarnessError::Domain(format!("{}: {e}", full.display())))
}

/// Target layout followed by the source layouts, in config order.
pub fn grid_layouts(cfg: &ExperimentConfig, g: &GridDomain) -> Result<(GridLayout, Vec<GridLayout>), HarnessError> {
    let target = read_layout(cfg, &g.target)?;
    let mut sources = Vec::with_capacity(g.sources.len());
    for (i, s) in g.sources.iter().enumerate() {
        let layout = match s {
            GridSource::Layout { layout } => read_layout(cfg, layout)?,
            GridSource::Keep { keep: [top, left, bottom, right] } => shrink_maze(
                &target,
                Region {
                    top: *top,
                    left: *left,
                    bottom: *bottom,
                    right: *right,
                },
            )
            .map_err(|e| HarnessError::Domain(format!("source {i}: {e}")))?,
            GridSource::Start { start: [r, c] } => {
                move_start(&target, (*r, *c)).map_err(|e| HarnessError::Domain(format!("source {i}: {e}")))?
            }
        };
        if (layout.width(), layout.height()) != (target.width(), target.height()) {
            return Err(HarnessError::Domain(format!("source {i}: grid size differs from the target")));
        }
        sources.push(layout);
    }
    Ok((target, sources))
}

pub fn build_experiment(cfg: &ExperimentConfig) -> Result<Experiment, HarnessError> {
    let eps = cfg.active.feature_epsilon;
    match cfg.domain {
        Domain::Maze | Domain::Gridworld => {
            let maze = cfg.domain == Domain::Maze;
            let g = if maze { cfg.maze.as_ref() } else { cfg.gridworld.as_ref() }
                .ok_or_else(|| HarnessError::Domain("missing domain section".into()))?;
            let (target, sources) = grid_layouts(cfg, g)?;
            let make = |l: GridLayout, name: String| -> Result<Box<dyn Environment>, HarnessError> {
                Ok(if maze {
                    Box::new(make_maze_env(l).with_name(name))
                } else {
                    Box::new(
                        make_gridworld_env(l)
                            .map_err(|e| HarnessError::Domain(e.to_string()))?
                            .with_name(name),
                    )
                })
            };
            let mut all = sources.clone();
            all.push(target.clone());
            let features = if sources.is_empty() {
                None
            } else if maze {
                Some(TaskFeatures::maze(&all, eps)?)
            } else {
                Some(TaskFeatures::gridworld(&all, eps)?)
            };
            let envs = sources
                .into_iter()
                .enumerate()
                .map(|(i, l)| make(l, format!("source {i}")))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Experiment {
                sources: envs,
                target: make(target, "target".into())?,
                features,
            })
        }
        Domain::Cartpole => {
            let c = cfg
                .cartpole
                .as_ref()
                .ok_or_else(|| HarnessError::Domain("missing cartpole section".into()))?;
            let mut disc = DiscretizerSpec::for_bounds(c.target.x_bound, c.target.angle_deg.to_radians());
            if let Some(bins) = c.bins {
                disc.bins = bins;
            }
            if let Some(ranges) = c.ranges {
                disc.ranges = ranges;
            }
            let make = |b: &super::config::Bounds| -> Result<Box<dyn Environment>, HarnessError> {
                let env = make_cartpole_env(CartPoleParams::with_bounds(b.x_bound, b.angle_deg), disc)
                    .map_err(|e| HarnessError::Domain(e.to_string()))?;
                Ok(Box::new(env))
            };
            let sources = c.sources.iter().map(make).collect::<Result<Vec<_>, _>>()?;
            let features = if c.sources.is_empty() {
                None
            } else {
                let raw = c
                    .sources
                    .iter()
                    .chain(std::iter::once(&c.target))
                    .map(|b| vec![b.x_bound, b.angle_deg])
                    .collect();
                Some(TaskFeatures::from_raw(raw, eps)?)
            };
            Ok(Experiment {
                sources,
                target: make(&c.target)?,
                features,
            })
        }
    }
}

/// A fresh selector for one run.
pub fn make_selector(
    kind: &SelectorKind,
    cfg: &ExperimentConfig,
    features: Option<&TaskFeatures>,
) -> Result<Box<dyn Selector>, HarnessError> {
    let probe = cfg.probe.to_probe();
    let need_features = || {
        features
            .cloned()
            .ok_or_else(|| HarnessError::Domain(format!("`{kind}` needs source tasks")))
    };
    Ok(match kind {
        SelectorKind::Baseline => Box::new(Fixed::new(Vec::new())),
        SelectorKind::Rmgs => Box::new(Rmgs::new(probe)),
        SelectorKind::Ltms => Box::new(Ltms::new(probe)),
        SelectorKind::ActiveRmgs => Box::new(
            ActiveRmgs::new(probe, need_features()?, cfg.active.per_step)
                .with_prune_threshold(cfg.active.prune_below)
                .with_diversity_threshold(cfg.active.diversity),
        ),
        SelectorKind::ActiveLtms => {
            let pairs = cfg
                .active
                .pairs
                .ok_or_else(|| HarnessError::Domain("active_ltms needs active.pairs".into()))?;
            Box::new(ActiveLtms::new(probe, need_features()?, pairs).with_diversity_threshold(cfg.active.diversity))
        }
        SelectorKind::Fixed(order) => Box::new(Fixed::new(order.clone())),
    })
}
