//! Classic cart-pole balancing with Euler integration, exposed to tabular
//! agents through a fixed grid discretization of (x, v, theta, omega).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mdp::{ActionId, Environment, MdpError, Rng, StateId, StateLabel, Transition};

pub const CARTPOLE_STEP_CAP: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CartPoleError {
    #[error("invalid cart-pole parameter: {0}")]
    InvalidParams(&'static str),
    #[error("invalid discretizer: {0}")]
    InvalidDiscretizer(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CartPoleParams {
    /// Episode fails when |x| exceeds this (m).
    pub x_bound: f64,
    /// Episode fails when |theta| exceeds this (rad).
    pub angle_bound: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    pub pole_half_length: f64,
    pub force_magnitude: f64,
    pub gravity: f64,
    pub dt: f64,
    pub step_cap: usize,
    /// Half-width of the uniform initial perturbation of every coordinate.
    pub init_noise: f64,
}

impl Default for CartPoleParams {
    fn default() -> Self {
        Self {
            x_bound: 2.4,
            angle_bound: 30f64.to_radians(),
            cart_mass: 1.0,
            pole_mass: 0.1,
            pole_half_length: 0.5,
            force_magnitude: 10.0,
            gravity: 9.8,
            dt: 0.02,
            step_cap: CARTPOLE_STEP_CAP,
            init_noise: 0.05,
        }
    }
}

impl CartPoleParams {
    pub fn with_bounds(x_bound: f64, angle_deg: f64) -> Self {
        Self {
            x_bound,
            angle_bound: angle_deg.to_radians(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CartPoleError> {
        use CartPoleError::InvalidParams as E;
        if !(self.x_bound > 0.0) {
            return Err(E("x_bound must be positive"));
        }
        if !(self.angle_bound > 0.0 && self.angle_bound < std::f64::consts::FRAC_PI_2) {
            return Err(E("angle_bound must lie in (0, pi/2)"));
        }
        if !(self.dt > 0.0) {
            return Err(E("dt must be positive"));
        }
        if self.step_cap == 0 {
            return Err(E("step_cap must be at least 1"));
        }
        if !(self.cart_mass > 0.0 && self.pole_mass > 0.0 && self.pole_half_length > 0.0) {
            return Err(E("masses and pole length must be positive"));
        }
        if !(self.init_noise >= 0.0) {
            return Err(E("init_noise must be non-negative"));
        }
        Ok(())
    }
}

/// Per-dimension bin counts and symmetric clip ranges for (x, v, theta, omega).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizerSpec {
    pub bins: [usize; 4],
    pub ranges: [f64; 4],
}

impl DiscretizerSpec {
    /// Default grid for given failure bounds: (6, 6, 12, 6) bins clipped to
    /// (±x_bound, ±3, ±angle_bound, ±3.5).
    pub fn for_bounds(x_bound: f64, angle_bound: f64) -> Self {
        Self {
            bins: [6, 6, 12, 6],
            ranges: [x_bound, 3.0, angle_bound, 3.5],
        }
    }

    pub fn validate(&self) -> Result<(), CartPoleError> {
        if self.bins.contains(&0) {
            return Err(CartPoleError::InvalidDiscretizer("bin counts must be >= 1"));
        }
        if self.ranges.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
            return Err(CartPoleError::InvalidDiscretizer(
                "clip ranges must be positive and finite",
            ));
        }
        Ok(())
    }

    pub fn state_count(&self) -> usize {
        self.bins.iter().product()
    }

    fn bin(&self, dim: usize, value: f64) -> usize {
        let n = self.bins[dim];
        let r = self.ranges[dim];
        let u = (value.clamp(-r, r) + r) / (2.0 * r);
        ((u * n as f64) as usize).min(n - 1)
    }

    pub fn bin_width(&self, dim: usize) -> f64 {
        2.0 * self.ranges[dim] / self.bins[dim] as f64
    }

    /// Maps a continuous state to its cell; values outside the clip ranges
    /// fall into the edge bins.
    pub fn discretize(&self, state: &[f64; 4]) -> StateId {
        (0..4).fold(0, |acc, d| acc * self.bins[d] + self.bin(d, state[d]))
    }

    pub fn center(&self, id: StateId) -> [f64; 4] {
        let mut rest = id;
        let mut out = [0.0; 4];
        for d in (0..4).rev() {
            let b = rest % self.bins[d];
            rest /= self.bins[d];
            out[d] = -self.ranges[d] + (b as f64 + 0.5) * self.bin_width(d);
        }
        out
    }

    fn covers(&self, point: &[f64]) -> bool {
        point.len() == 4 && point.iter().zip(&self.ranges).all(|(p, r)| p.abs() < *r)
    }
}

#[derive(Debug, Clone)]
pub struct CartPoleEnv {
    name: String,
    params: CartPoleParams,
    disc: DiscretizerSpec,
    state: [f64; 4],
    active: bool,
    steps: usize,
}

pub fn make_cartpole_env(
    params: CartPoleParams,
    disc: DiscretizerSpec,
) -> Result<CartPoleEnv, CartPoleError> {
    params.validate()?;
    disc.validate()?;
    Ok(CartPoleEnv {
        name: format!(
            "cartpole(x={}, theta={:.0}deg)",
            params.x_bound,
            params.angle_bound.to_degrees()
        ),
        params,
        disc,
        state: [0.0; 4],
        active: false,
        steps: 0,
    })
}

impl CartPoleEnv {
    pub fn params(&self) -> &CartPoleParams {
        &self.params
    }

    pub fn discretizer(&self) -> &DiscretizerSpec {
        &self.disc
    }

    /// Continuous state (x, v, theta, omega).
    pub fn physical_state(&self) -> [f64; 4] {
        self.state
    }

    /// Starts an episode from an exact continuous state.
    pub fn reset_to(&mut self, state: [f64; 4]) -> StateId {
        self.state = state;
        self.active = true;
        self.steps = 0;
        self.disc.discretize(&self.state)
    }

    /// One Euler step of the classic equations of motion under `force`.
    pub fn dynamics(&self, s: [f64; 4], force: f64) -> [f64; 4] {
        let p = &self.params;
        let [x, v, theta, omega] = s;
        let total_mass = p.cart_mass + p.pole_mass;
        let polemass_length = p.pole_mass * p.pole_half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + polemass_length * omega * omega * sin) / total_mass;
        let theta_acc = (p.gravity * sin - cos * temp)
            / (p.pole_half_length * (4.0 / 3.0 - p.pole_mass * cos * cos / total_mass));
        let x_acc = temp - polemass_length * theta_acc * cos / total_mass;
        [
            x + p.dt * v,
            v + p.dt * x_acc,
            theta + p.dt * omega,
            omega + p.dt * theta_acc,
        ]
    }

    fn out_of_bounds(&self) -> bool {
        self.state[0].abs() > self.params.x_bound || self.state[2].abs() > self.params.angle_bound
    }
}

impl Environment for CartPoleEnv {
    fn name(&self) -> &str {
        &self.name
    }

    fn state_count(&self) -> usize {
        self.disc.state_count()
    }

    fn action_count(&self) -> usize {
        2
    }

    fn step_cap(&self) -> usize {
        self.params.step_cap
    }

    fn reset(&mut self, rng: &mut Rng) -> StateId {
        let n = self.params.init_noise;
        let s = [(); 4].map(|_| rng.uniform_in(-n, n));
        self.reset_to(s)
    }

    fn step(&mut self, action: ActionId, _rng: &mut Rng) -> Result<Transition, MdpError> {
        if !self.active {
            return Err(MdpError::EpisodeNotActive);
        }
        if action >= 2 {
            return Err(MdpError::InvalidAction { action, count: 2 });
        }
        let state = self.disc.discretize(&self.state);
        let force = if action == 1 {
            self.params.force_magnitude
        } else {
            -self.params.force_magnitude
        };
        self.state = self.dynamics(self.state, force);
        self.steps += 1;
        let failed = self.out_of_bounds();
        let capped = !failed && self.steps >= self.params.step_cap;
        let terminal = failed || capped;
        self.active = !terminal;
        Ok(Transition {
            state,
            action,
            reward: 1.0,
            next_state: self.disc.discretize(&self.state),
            terminal,
            truncated: capped,
        })
    }

    fn label(&self, state: StateId) -> StateLabel {
        StateLabel::Point(self.disc.center(state).to_vec())
    }

    fn locate(&self, label: &StateLabel) -> Option<StateId> {
        match label {
            StateLabel::Point(p) if self.disc.covers(p) => {
                let arr = [p[0], p[1], p[2], p[3]];
                Some(self.disc.discretize(&arr))
            }
            _ => None,
        }
    }

    fn box_clone(&self) -> Box<dyn Environment> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> CartPoleEnv {
        let p = CartPoleParams::default();
        make_cartpole_env(p, DiscretizerSpec::for_bounds(p.x_bound, p.angle_bound)).unwrap()
    }

    #[test]
    fn mirror_symmetry_under_action_flip() {
        let mut a = env();
        let mut b = env();
        let mut rng = Rng::new(0);
        a.reset_to([0.0; 4]);
        b.reset_to([0.0; 4]);
        let seq = [0, 0, 1, 0, 1, 1, 1, 0];
        for &act in &seq {
            a.step(act, &mut rng).unwrap();
            b.step(1 - act, &mut rng).unwrap();
            let (sa, sb) = (a.physical_state(), b.physical_state());
            for d in 0..4 {
                assert_eq!(sa[d], -sb[d]);
            }
        }
    }

    #[test]
    fn angle_past_bound_terminates() {
        let mut e = env();
        let mut rng = Rng::new(0);
        let bound = e.params().angle_bound;
        e.reset_to([0.0, 0.0, bound - 1e-4, 2.0]);
        let t = e.step(1, &mut rng).unwrap();
        assert!(t.terminal && !t.truncated);
        assert_eq!(t.reward, 1.0);
    }

    #[test]
    fn no_force_no_gravity_no_motion() {
        let p = CartPoleParams {
            force_magnitude: 0.0,
            gravity: 0.0,
            ..CartPoleParams::default()
        };
        let mut e = make_cartpole_env(p, DiscretizerSpec::for_bounds(2.4, 0.5)).unwrap();
        let mut rng = Rng::new(0);
        e.reset_to([0.0; 4]);
        for a in [0, 1, 0, 1, 1] {
            e.step(a, &mut rng).unwrap();
        }
        assert_eq!(e.physical_state(), [0.0; 4]);
    }

    #[test]
    fn cap_truncates_at_step_limit() {
        let p = CartPoleParams {
            gravity: 0.0,
            force_magnitude: 0.0,
            step_cap: 7,
            ..CartPoleParams::default()
        };
        let mut e = make_cartpole_env(p, DiscretizerSpec::for_bounds(2.4, 0.5)).unwrap();
        let mut rng = Rng::new(0);
        let tr = crate::mdp::run_episode(&mut e, |_, _| 0, &mut rng).unwrap();
        assert_eq!(tr.steps, 7);
        assert_eq!(tr.total_reward, 7.0);
        assert!(tr.transitions[6].truncated);
    }

    #[test]
    fn invalid_params_rejected() {
        let bad = CartPoleParams {
            angle_bound: 2.0,
            ..CartPoleParams::default()
        };
        assert!(bad.validate().is_err());
        let disc = DiscretizerSpec {
            bins: [0, 1, 1, 1],
            ranges: [1.0; 4],
        };
        assert!(disc.validate().is_err());
    }

    #[test]
    fn discretizer_center_round_trip() {
        let d = DiscretizerSpec::for_bounds(2.4, 0.5);
        for id in 0..d.state_count() {
            assert_eq!(d.discretize(&d.center(id)), id);
        }
    }
}
