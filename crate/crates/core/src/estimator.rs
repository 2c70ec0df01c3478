//! The two-step distributed quantile recursion.
//!
//! Each iteration every node first nudges its state toward its own datum
//! (local update, step α(i)), then mixes with what it hears from its neighbors
//! over noisy links (averaging, step η(i)):
//!
//! ```text
//! ψ_n     = ω_n − α(i)·[u(ω_n − x_n) − p]
//! ω_n(+1) = ψ_n − η(i)·Σ_{l∈N(n)} [ψ_n − (ψ_l + ξ_nl)]
//! ```
//!
//! Starting from ω(0) = x, every state converges to the sample quantile θ_p.

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::noise::{realization_rng, LinkNoise, NoiseModel};
use crate::quantile::{step_indicator, MeasurementSet};
use crate::schedule::StepSchedule;

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}

/// y_n = u(ω_n − x_n) − p, which is always −p or 1 − p.
pub fn innovation(omega: &[f64], data: &MeasurementSet, p: f64) -> Result<Vec<f64>> {
    check_len(data.len(), omega.len())?;
    Ok(omega
        .iter()
        .zip(data.values())
        .map(|(&w, &x)| step_indicator(w, x) - p)
        .collect())
}

/// ψ = ω − α·y.
pub fn local_update(omega: &[f64], data: &MeasurementSet, p: f64, alpha: f64) -> Result<Vec<f64>> {
    let y = innovation(omega, data, p)?;
    Ok(omega.iter().zip(&y).map(|(w, y)| w - alpha * y).collect())
}

/// Averaging with explicit per-link noise values.
pub fn averaging_step_with(
    psi: &[f64],
    network: &Network,
    eta: f64,
    noise: &LinkNoise,
) -> Result<Vec<f64>> {
    let n = network.node_count();
    check_len(n, psi.len())?;
    check_len(n, noise.node_count())?;
    Ok((0..n)
        .map(|node| {
            let disagreement: f64 = network
                .neighbors(node)
                .iter()
                .map(|&l| psi[node] - (psi[l] + noise.get(node, l)))
                .sum();
            psi[node] - eta * disagreement
        })
        .collect())
}

/// Averaging with fresh noise drawn from `rng`. With [`NoiseModel::None`] this is (I − ηL)ψ.
pub fn averaging_step(
    psi: &[f64],
    network: &Network,
    eta: f64,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    check_len(network.node_count(), psi.len())?;
    let links = noise.sample_links(network, rng);
    averaging_step_with(psi, network, eta, &links)
}

/// State of one estimator trajectory.
#[derive(Debug, Clone)]
pub struct EstimatorRun<'a> {
    network: &'a Network,
    data: &'a MeasurementSet,
    p: f64,
    schedule: StepSchedule,
    noise: NoiseModel,
    omega: Vec<f64>,
    psi: Vec<f64>,
    iteration: u64,
    rng: ChaCha8Rng,
}

impl<'a> EstimatorRun<'a> {
    /// Starts at ω(0) = x with the stream `realization_rng(seed, 0)`.
    pub fn new(
        network: &'a Network,
        data: &'a MeasurementSet,
        p: f64,
        schedule: StepSchedule,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        Self::with_rng(network, data, p, schedule, noise, realization_rng(seed, 0))
    }

    pub fn with_rng(
        network: &'a Network,
        data: &'a MeasurementSet,
        p: f64,
        schedule: StepSchedule,
        noise: NoiseModel,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        check_len(network.node_count(), data.len())?;
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("p = {p} must lie in (0, 1)")));
        }
        Ok(Self {
            network,
            data,
            p,
            schedule,
            noise,
            omega: data.values().to_vec(),
            psi: vec![0.0; data.len()],
            iteration: 0,
            rng,
        })
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    /// Number of completed iterations.
    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn network(&self) -> &'a Network {
        self.network
    }

    pub fn data(&self) -> &'a MeasurementSet {
        self.data
    }

    pub fn schedule(&self) -> &StepSchedule {
        &self.schedule
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn into_omega(self) -> Vec<f64> {
        self.omega
    }

    fn local_phase(&mut self) {
        let alpha = self.schedule.alpha_at(self.iteration);
        for ((psi, &w), &x) in self.psi.iter_mut().zip(&self.omega).zip(self.data.values()) {
            *psi = w - alpha * (step_indicator(w, x) - self.p);
        }
    }

    /// One combined iteration, drawing link noise from the run's own stream.
    pub fn step(&mut self) {
        self.local_phase();
        let eta = self.schedule.eta_at(self.iteration);
        let net = self.network;
        let silent = self.noise.is_silent();
        // noise drawn n ascending, l ascending, matching NoiseModel::sample_links
        for node in 0..net.node_count() {
            let own = self.psi[node];
            let mut disagreement = 0.0;
            for &l in net.neighbors(node) {
                let xi = if silent {
                    0.0
                } else {
                    self.noise.draw(&mut self.rng)
                };
                disagreement += own - (self.psi[l] + xi);
            }
            self.omega[node] = own - eta * disagreement;
        }
        self.iteration += 1;
    }

    /// One combined iteration using caller-supplied link noise instead of the stream.
    pub fn step_with_noise(&mut self, noise: &LinkNoise) -> Result<()> {
        check_len(self.network.node_count(), noise.node_count())?;
        self.local_phase();
        let eta = self.schedule.eta_at(self.iteration);
        self.omega = averaging_step_with(&self.psi, self.network, eta, noise)?;
        self.iteration += 1;
        Ok(())
    }

    /// Applies [`step`](Self::step) `iterations` times.
    pub fn run_to(&mut self, iterations: u64) {
        self.run_observed(iterations, |_, _| {});
    }

    /// Like [`run_to`](Self::run_to), calling `observer(i, ω(i))` after each step.
    pub fn run_observed<F: FnMut(u64, &[f64])>(&mut self, iterations: u64, mut observer: F) {
        for _ in 0..iterations {
            self.step();
            observer(self.iteration, &self.omega);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(v: &[f64]) -> MeasurementSet {
        MeasurementSet::new(v.to_vec()).unwrap()
    }

    #[test]
    fn local_update_boundary_uses_upper_branch() {
        let d = data(&[0.5, 0.2]);
        let psi = local_update(&[0.5, 0.2], &d, 0.25, 0.1).unwrap();
        assert!((psi[0] - 0.425).abs() < 1e-15);
        assert!((psi[1] - 0.125).abs() < 1e-15);
    }

    #[test]
    fn local_update_lower_branch() {
        let d = data(&[0.5, 0.0]);
        let psi = local_update(&[0.3, 0.0], &d, 0.25, 0.1).unwrap();
        assert!((psi[0] - 0.325).abs() < 1e-15);
    }

    #[test]
    fn zero_steps_are_identity() {
        let d = data(&[0.1, 0.7, 0.4]);
        let w = [0.3, 0.2, 0.9];
        assert_eq!(local_update(&w, &d, 0.5, 0.0).unwrap(), w.to_vec());
        let g = Network::complete(3).unwrap();
        let mut rng = realization_rng(0, 0);
        let out = averaging_step(&w, &g, 0.0, &NoiseModel::None, &mut rng).unwrap();
        assert_eq!(out, w.to_vec());
    }

    #[test]
    fn dimension_errors() {
        let d = data(&[0.1, 0.7, 0.4]);
        assert_eq!(
            local_update(&[0.0, 0.0], &d, 0.5, 0.1),
            Err(Error::Dimension {
                expected: 3,
                got: 2
            })
        );
        let g = Network::complete(3).unwrap();
        let mut rng = realization_rng(0, 0);
        assert!(averaging_step(&[0.0; 4], &g, 0.1, &NoiseModel::None, &mut rng).is_err());
        let g4 = Network::complete(4).unwrap();
        assert!(EstimatorRun::new(
            &g4,
            &d,
            0.5,
            StepSchedule::reference(3),
            NoiseModel::None,
            0
        )
        .is_err());
    }

    #[test]
    fn averaging_two_node_path() {
        let g = Network::path(2).unwrap();
        let mut rng = realization_rng(0, 0);
        let out = averaging_step(&[0.0, 1.0], &g, 0.25, &NoiseModel::None, &mut rng).unwrap();
        assert_eq!(out, vec![0.25, 0.75]);
    }

    #[test]
    fn constant_vector_is_fixed_by_averaging() {
        let g = Network::random_geometric(10, 0.6, 2).unwrap();
        let mut rng = realization_rng(0, 0);
        let out = averaging_step(&[0.7; 10], &g, 0.05, &NoiseModel::None, &mut rng).unwrap();
        assert!(out.iter().all(|&v| v == 0.7));
    }

    #[test]
    fn frozen_dynamics() {
        let g = Network::path(3).unwrap();
        let d = data(&[0.3, 0.1, 0.2]);
        let sched = StepSchedule::new(0.0, 1.0, 0.0, 0.505);
        let mut run =
            EstimatorRun::new(&g, &d, 0.5, sched, NoiseModel::gaussian(0.09).unwrap(), 1).unwrap();
        run.run_to(50);
        assert_eq!(run.omega(), d.values());
        assert_eq!(run.iteration(), 50);
    }

    #[test]
    fn identical_nodes_stay_identical() {
        let g = Network::cycle(5).unwrap();
        let d = data(&[0.4; 5]);
        let mut run =
            EstimatorRun::new(&g, &d, 0.3, StepSchedule::reference(2), NoiseModel::None, 0)
                .unwrap();
        run.step();
        // every node sits on its datum, so u = 1 and ψ = 0.4 − α(0)·0.7
        let expected = 0.4 - 0.7;
        assert!(run.omega().iter().all(|&w| (w - expected).abs() < 1e-15));
    }

    #[test]
    fn two_node_single_step() {
        // x = (0, 1), p = 0.25, α(0) = 1, η(0) = 0.25
        // ψ = (0 − 0.75, 1 − 0.75) = (−0.75, 0.25)
        // ω = (−0.75 − 0.25·(−1), 0.25 − 0.25·1) = (−0.5, 0)
        let g = Network::path(2).unwrap();
        let d = data(&[0.0, 1.0]);
        let sched = StepSchedule::new(1.0, 1.0, 0.25, 0.6);
        let mut run = EstimatorRun::new(&g, &d, 0.25, sched, NoiseModel::None, 0).unwrap();
        run.step();
        assert_eq!(run.omega(), &[-0.5, 0.0]);
    }

    #[test]
    fn step_matches_sampled_noise_path() {
        let g = Network::random_geometric(8, 0.6, 3).unwrap();
        let d = data(&[0.1, 0.9, 0.3, 0.5, 0.2, 0.8, 0.4, 0.6]);
        let noise = NoiseModel::gaussian(0.09).unwrap();
        let sched = StepSchedule::reference(g.max_degree());
        let mut streamed = EstimatorRun::new(&g, &d, 0.3, sched, noise, 11).unwrap();
        let mut injected = streamed.clone();
        let mut rng = realization_rng(11, 0);
        for _ in 0..20 {
            streamed.step();
            let links = noise.sample_links(&g, &mut rng);
            injected.step_with_noise(&links).unwrap();
        }
        for (a, b) in streamed.omega().iter().zip(injected.omega()) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn observer_sees_every_iteration() {
        let g = Network::complete(3).unwrap();
        let d = data(&[0.0, 0.5, 1.0]);
        let mut run =
            EstimatorRun::new(&g, &d, 0.5, StepSchedule::reference(2), NoiseModel::None, 0)
                .unwrap();
        let mut seen = Vec::new();
        run.run_observed(5, |i, w| seen.push((i, w.len())));
        assert_eq!(seen, (1..=5).map(|i| (i, 3)).collect::<Vec<_>>());
    }
}
