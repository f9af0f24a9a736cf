//! Network data model, random topology generation and the per-user /
//! base-station metrics every other module is built on.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Generator family used by [`sample_network`]; recorded in run metadata.
pub const GENERATOR_FAMILY: &str = "rand_chacha::ChaCha8Rng::seed_from_u64";
pub const GENERATOR_VERSION: &str = "rand_chacha 0.9";

/// Link distances are clamped to this floor before path loss is applied.
pub const MIN_DISTANCE: f64 = 1e-3;

/// Per-user transmit powers in linear units.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector<T>(pub Vec<T>);

/// Per-user interference prices.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector<T>(pub Vec<T>);

macro_rules! vector_newtype {
    ($name:ident) => {
        impl<T: Scalar> $name<T> {
            pub fn zeros(n: usize) -> Self {
                Self(vec![T::zero(); n])
            }

            pub fn into_inner(self) -> Vec<T> {
                self.0
            }

            pub fn as_slice(&self) -> &[T] {
                &self.0
            }
        }

        impl<T> From<Vec<T>> for $name<T> {
            fn from(v: Vec<T>) -> Self {
                Self(v)
            }
        }

        impl<T> Deref for $name<T> {
            type Target = [T];
            fn deref(&self) -> &[T] {
                &self.0
            }
        }

        impl<T> DerefMut for $name<T> {
            fn deref_mut(&mut self) -> &mut [T] {
                &mut self.0
            }
        }
    };
}

vector_newtype!(PowerVector);
vector_newtype!(PriceVector);

impl<T: Scalar> PriceVector<T> {
    /// The same price broadcast to all `n` users.
    pub fn uniform(n: usize, price: T) -> Self {
        Self(vec![price; n])
    }
}

/// One realization of the network.
///
/// `h[j][i]` is the power gain from source `j` to destination `i`, so the
/// diagonal holds the direct links. `g[i]` is the gain from source `i` to the
/// base station. Instances are validated on construction and immutable.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkInstance<T> {
    h: Vec<Vec<T>>,
    g: Vec<T>,
    sigma2: T,
    w: Vec<T>,
    p_max: Vec<T>,
    i_th: T,
}

fn positive_finite<T: Scalar>(x: T) -> bool {
    x.is_finite() && x > T::zero()
}

impl<T: Scalar> NetworkInstance<T> {
    pub fn new(
        h: Vec<Vec<T>>,
        g: Vec<T>,
        sigma2: T,
        w: Vec<T>,
        p_max: Vec<T>,
        i_th: T,
    ) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::InvalidInstance(
                "at least one user is required".into(),
            ));
        }
        if h.iter().any(|row| row.len() != n) {
            return Err(Error::Dimension(format!("channel matrix must be {n}x{n}")));
        }
        for (name, v) in [("g", &g), ("w", &w), ("p_max", &p_max)] {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "{name} has length {}, expected {n}",
                    v.len()
                )));
            }
            if let Some(bad) = v.iter().position(|&x| !positive_finite(x)) {
                return Err(Error::InvalidInstance(format!(
                    "{name}[{bad}] = {} must be finite and positive",
                    v[bad]
                )));
            }
        }
        for (j, row) in h.iter().enumerate() {
            if let Some(i) = row.iter().position(|&x| !positive_finite(x)) {
                return Err(Error::InvalidInstance(format!(
                    "h[{j}][{i}] = {} must be finite and positive",
                    row[i]
                )));
            }
        }
        if !positive_finite(sigma2) {
            return Err(Error::InvalidInstance(format!(
                "sigma2 = {sigma2} must be positive"
            )));
        }
        if !positive_finite(i_th) {
            return Err(Error::InvalidInstance(format!(
                "i_th = {i_th} must be positive"
            )));
        }
        Ok(Self {
            h,
            g,
            sigma2,
            w,
            p_max,
            i_th,
        })
    }

    /// Same instance with a different interference threshold.
    pub fn with_i_th(&self, i_th: T) -> Result<Self> {
        Self::new(
            self.h.clone(),
            self.g.clone(),
            self.sigma2,
            self.w.clone(),
            self.p_max.clone(),
            i_th,
        )
    }

    /// Same instance with every peak power set to `p_max`.
    pub fn with_uniform_p_max(&self, p_max: T) -> Result<Self> {
        let n = self.n();
        Self::new(
            self.h.clone(),
            self.g.clone(),
            self.sigma2,
            self.w.clone(),
            vec![p_max; n],
            self.i_th,
        )
    }

    pub fn n(&self) -> usize {
        self.g.len()
    }

    /// Gain from source `from` to destination `to`.
    #[inline]
    pub fn h(&self, from: usize, to: usize) -> T {
        self.h[from][to]
    }

    pub fn h_matrix(&self) -> &[Vec<T>] {
        &self.h
    }

    pub fn g(&self) -> &[T] {
        &self.g
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn p_max(&self) -> &[T] {
        &self.p_max
    }

    pub fn i_th(&self) -> T {
        self.i_th
    }

    pub fn peak_powers(&self) -> PowerVector<T> {
        PowerVector(self.p_max.clone())
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange {
                index: i,
                n: self.n(),
            });
        }
        Ok(())
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::Dimension(format!(
                "{what} has length {len}, expected {}",
                self.n()
            )));
        }
        Ok(())
    }

    /// Interference plus noise seen at destination `i`.
    pub fn ipn(&self, p: &[T], i: usize) -> Result<T> {
        self.check_index(i)?;
        self.check_len("power vector", p.len())?;
        Ok(self.ipn_at(p, i))
    }

    pub(crate) fn ipn_at(&self, p: &[T], i: usize) -> T {
        let mut acc = self.sigma2;
        for (j, &pj) in p.iter().enumerate() {
            if j != i {
                acc += pj * self.h[j][i];
            }
        }
        acc
    }

    /// Total received power at destination `i` including its own signal.
    pub(crate) fn received_at(&self, p: &[T], i: usize) -> T {
        p.iter()
            .enumerate()
            .fold(self.sigma2, |acc, (j, &pj)| acc + pj * self.h[j][i])
    }

    pub fn sinr(&self, p: &[T], i: usize) -> Result<T> {
        let d = self.ipn(p, i)?;
        Ok(p[i] * self.h[i][i] / d)
    }

    /// Achievable rate in nats.
    pub fn rate(&self, p: &[T], i: usize) -> Result<T> {
        Ok(self.sinr(p, i)?.ln_1p())
    }

    pub fn user_payoff(&self, p: &[T], prices: &[T], i: usize) -> Result<T> {
        self.check_len("price vector", prices.len())?;
        let r = self.rate(p, i)?;
        Ok(self.w[i] * r - p[i] * self.g[i] * prices[i])
    }

    pub(crate) fn payoff_at(&self, p: &[T], prices: &[T], i: usize) -> T {
        let s = p[i] * self.h[i][i] / self.ipn_at(p, i);
        self.w[i] * s.ln_1p() - p[i] * self.g[i] * prices[i]
    }

    pub fn bs_revenue(&self, p: &[T], prices: &[T]) -> Result<T> {
        self.check_len("power vector", p.len())?;
        self.check_len("price vector", prices.len())?;
        Ok(p.iter()
            .zip(&self.g)
            .zip(prices)
            .fold(T::zero(), |acc, ((&pi, &gi), &c)| acc + pi * gi * c))
    }

    pub fn total_interference(&self, p: &[T]) -> Result<T> {
        self.check_len("power vector", p.len())?;
        Ok(self.interference_of(p))
    }

    pub(crate) fn interference_of(&self, p: &[T]) -> T {
        p.iter()
            .zip(&self.g)
            .fold(T::zero(), |acc, (&pi, &gi)| acc + pi * gi)
    }

    /// Sum over users of the weighted rate.
    pub fn sum_rate(&self, p: &[T]) -> Result<T> {
        self.check_len("power vector", p.len())?;
        Ok((0..self.n()).fold(T::zero(), |acc, i| {
            acc + (p[i] * self.h[i][i] / self.ipn_at(p, i)).ln_1p()
        }))
    }

    /// Whether `p` lies in the box `[0, p_max]` up to `slack`.
    pub fn is_box_feasible(&self, p: &[T], slack: T) -> bool {
        p.len() == self.n()
            && p.iter()
                .zip(&self.p_max)
                .all(|(&x, &cap)| x >= -slack && x <= cap + slack)
    }
}

/// Declarative description of a random single-cell topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub n: usize,
    #[serde(default = "defaults::cell_radius")]
    pub cell_radius: f64,
    #[serde(default = "defaults::pair_distance_max")]
    pub pair_distance_max: f64,
    #[serde(default = "defaults::path_loss_exponent")]
    pub path_loss_exponent: f64,
    #[serde(default = "defaults::unit")]
    pub sigma2: f64,
    #[serde(default = "defaults::unit")]
    pub weight: f64,
    pub p_max_db: f64,
    pub i_th: f64,
    pub seed: u64,
}

mod defaults {
    pub fn cell_radius() -> f64 {
        100.0
    }
    pub fn pair_distance_max() -> f64 {
        10.0
    }
    pub fn path_loss_exponent() -> f64 {
        2.0
    }
    pub fn unit() -> f64 {
        1.0
    }
}

impl TopologyConfig {
    pub fn new(n: usize, p_max_db: f64, i_th: f64, seed: u64) -> Self {
        Self {
            n,
            cell_radius: defaults::cell_radius(),
            pair_distance_max: defaults::pair_distance_max(),
            path_loss_exponent: defaults::path_loss_exponent(),
            sigma2: 1.0,
            weight: 1.0,
            p_max_db,
            i_th,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        let positives = [
            ("cell_radius", self.cell_radius),
            ("pair_distance_max", self.pair_distance_max),
            ("path_loss_exponent", self.path_loss_exponent),
            ("sigma2", self.sigma2),
            ("weight", self.weight),
            ("i_th", self.i_th),
        ];
        for (name, v) in positives {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !self.p_max_db.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "p_max_db must be finite, got {}",
                self.p_max_db
            )));
        }
        Ok(())
    }

    /// Peak power in linear units.
    pub fn p_max_linear(&self) -> f64 {
        db_to_linear(self.p_max_db)
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    x: f64,
    y: f64,
}

impl Point {
    fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Node positions of one sampled topology, base station at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub sources: Vec<(f64, f64)>,
    pub destinations: Vec<(f64, f64)>,
}

impl Layout {
    pub fn pair_distances(&self) -> Vec<f64> {
        self.sources
            .iter()
            .zip(&self.destinations)
            .map(|(&(sx, sy), &(dx, dy))| (sx - dx).hypot(sy - dy))
            .collect()
    }
}

/// Draws a network instance; a pure function of `cfg`.
pub fn sample_network<T: Scalar>(cfg: &TopologyConfig) -> Result<NetworkInstance<T>> {
    sample_network_with_layout(cfg).map(|(inst, _)| inst)
}

/// Like [`sample_network`] but also returns the node positions.
pub fn sample_network_with_layout<T: Scalar>(
    cfg: &TopologyConfig,
) -> Result<(NetworkInstance<T>, Layout)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = cfg.n;
    let tau = std::f64::consts::TAU;

    let mut sources = Vec::with_capacity(n);
    let mut destinations = Vec::with_capacity(n);
    for _ in 0..n {
        let r = cfg.cell_radius * rng.random::<f64>().sqrt();
        let a = tau * rng.random::<f64>();
        let src = Point {
            x: r * a.cos(),
            y: r * a.sin(),
        };
        // 1 - U lies in (0, 1], so pair distances lie in (0, pair_distance_max].
        let d = cfg.pair_distance_max * (1.0 - rng.random::<f64>());
        let b = tau * rng.random::<f64>();
        let dst = Point {
            x: src.x + d * b.cos(),
            y: src.y + d * b.sin(),
        };
        sources.push(src);
        destinations.push(dst);
    }

    let theta = cfg.path_loss_exponent;
    let mut gain = |a: Point, b: Point| -> Result<T> {
        let fading: f64 = rng.sample(Exp1);
        let l = a.dist(b).max(MIN_DISTANCE);
        T::from_f64(fading * l.powf(-theta))
            .ok_or_else(|| Error::InvalidInstance("gain not representable".into()))
    };

    let mut h = Vec::with_capacity(n);
    for &src in &sources {
        let row = destinations
            .iter()
            .map(|&dst| gain(src, dst))
            .collect::<Result<Vec<T>>>()?;
        h.push(row);
    }
    let bs = Point { x: 0.0, y: 0.0 };
    let g = sources
        .iter()
        .map(|&s| gain(s, bs))
        .collect::<Result<Vec<T>>>()?;

    let inst = NetworkInstance::new(
        h,
        g,
        T::lit(cfg.sigma2),
        vec![T::lit(cfg.weight); n],
        vec![T::lit(cfg.p_max_linear()); n],
        T::lit(cfg.i_th),
    )?;
    let layout = Layout {
        sources: sources.iter().map(|p| (p.x, p.y)).collect(),
        destinations: destinations.iter().map(|p| (p.x, p.y)).collect(),
    };
    Ok((inst, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn two_user() -> NetworkInstance<f64> {
        NetworkInstance::new(
            vec![vec![1.0, 0.1], vec![0.2, 1.0]],
            vec![1.0, 2.0],
            1.0,
            vec![1.0, 1.0],
            vec![10.0, 10.0],
            20.0,
        )
        .unwrap()
    }

    fn single() -> NetworkInstance<f64> {
        NetworkInstance::new(vec![vec![1.0]], vec![1.0], 1.0, vec![1.0], vec![10.0], 20.0).unwrap()
    }

    #[test]
    fn rejects_bad_instances() {
        assert!(NetworkInstance::<f64>::new(vec![], vec![], 1.0, vec![], vec![], 1.0).is_err());
        assert!(NetworkInstance::new(
            vec![vec![1.0, 1.0]],
            vec![1.0],
            1.0,
            vec![1.0],
            vec![1.0],
            1.0
        )
        .is_err());
        assert!(
            NetworkInstance::new(vec![vec![0.0]], vec![1.0], 1.0, vec![1.0], vec![1.0], 1.0)
                .is_err()
        );
        assert!(
            NetworkInstance::new(vec![vec![1.0]], vec![1.0], 0.0, vec![1.0], vec![1.0], 1.0)
                .is_err()
        );
        assert!(NetworkInstance::new(
            vec![vec![1.0]],
            vec![1.0],
            1.0,
            vec![1.0],
            vec![f64::NAN],
            1.0
        )
        .is_err());
        assert!(
            NetworkInstance::new(vec![vec![1.0]], vec![1.0], 1.0, vec![-1.0], vec![1.0], 1.0)
                .is_err()
        );
        assert!(
            NetworkInstance::new(vec![vec![1.0]], vec![1.0], 1.0, vec![1.0], vec![1.0], 0.0)
                .is_err()
        );
    }

    #[test]
    fn ipn_examples() {
        let inst = two_user();
        assert_eq!(inst.ipn(&[0.0, 0.0], 0).unwrap(), 1.0);
        assert_relative_eq!(inst.ipn(&[10.0, 10.0], 0).unwrap(), 3.0, epsilon = 1e-12);
        assert!(matches!(
            inst.ipn(&[0.0, 0.0], 2),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(inst.ipn(&[0.0], 0), Err(Error::Dimension(_))));
    }

    #[test]
    fn sinr_and_rate_examples() {
        let one = single();
        assert_eq!(one.sinr(&[0.0], 0).unwrap(), 0.0);
        assert_eq!(one.sinr(&[1.0], 0).unwrap(), 1.0);
        assert_eq!(one.rate(&[0.0], 0).unwrap(), 0.0);
        let e1 = std::f64::consts::E - 1.0;
        assert_relative_eq!(one.rate(&[e1], 0).unwrap(), 1.0, epsilon = 1e-12);

        let two = two_user();
        let s = two.sinr(&[8.367, 3.163], 0).unwrap();
        assert_relative_eq!(s, 8.367 / 1.6326, epsilon = 1e-12);
        assert!((s - 5.125).abs() < 1e-3);
    }

    #[test]
    fn payoff_and_revenue_examples() {
        let one = single();
        assert_eq!(one.user_payoff(&[0.0], &[0.3], 0).unwrap(), 0.0);
        assert_relative_eq!(
            one.user_payoff(&[9.0], &[0.1], 0).unwrap(),
            10f64.ln() - 0.9,
            epsilon = 1e-12
        );
        assert!((one.user_payoff(&[9.0], &[0.1], 0).unwrap() - 1.4026).abs() < 1e-4);
        assert_eq!(
            one.user_payoff(&[4.0], &[0.0], 0).unwrap(),
            one.rate(&[4.0], 0).unwrap()
        );
        assert_relative_eq!(one.bs_revenue(&[10.0], &[1.0 / 11.0]).unwrap(), 10.0 / 11.0);

        let two = two_user();
        let p = [3.0, 4.0];
        assert_eq!(two.bs_revenue(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        let i = two.total_interference(&p).unwrap();
        assert_eq!(i, 11.0);
        assert_relative_eq!(two.bs_revenue(&p, &[0.25, 0.25]).unwrap(), 0.25 * i);
        assert_eq!(two.total_interference(&[10.0, 10.0]).unwrap(), 30.0);
    }

    #[test]
    fn sampling_is_deterministic_and_sized() {
        let cfg = TopologyConfig::new(4, 10.0, 0.05, 42);
        let a: NetworkInstance<f64> = sample_network(&cfg).unwrap();
        let b: NetworkInstance<f64> = sample_network(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.h_matrix().len(), 4);
        assert!(a.h_matrix().iter().all(|r| r.len() == 4));
        assert_eq!(a.g().len(), 4);
        assert_relative_eq!(a.p_max()[0], 10.0, epsilon = 1e-12);

        let other: NetworkInstance<f64> =
            sample_network(&TopologyConfig { seed: 43, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn sampled_geometry_respects_bounds() {
        for seed in 0..50 {
            let cfg = TopologyConfig::new(8, 10.0, 0.05, seed);
            let (_, layout) = sample_network_with_layout::<f64>(&cfg).unwrap();
            for d in layout.pair_distances() {
                assert!(d > 0.0 && d <= 10.0 + 1e-12, "pair distance {d}");
            }
            for &(x, y) in &layout.sources {
                assert!(x.hypot(y) <= 100.0 + 1e-12);
            }
        }
    }

    #[test]
    fn invalid_topology_rejected() {
        let mut cfg = TopologyConfig::new(0, 10.0, 0.05, 1);
        assert!(sample_network::<f64>(&cfg).is_err());
        cfg.n = 2;
        cfg.cell_radius = -1.0;
        let err = sample_network::<f64>(&cfg).unwrap_err().to_string();
        assert!(err.contains("cell_radius"), "{err}");
    }

    #[test]
    fn topology_json_uses_defaults() {
        let cfg: TopologyConfig =
            serde_json::from_str(r#"{"n":4,"p_max_db":10,"i_th":0.05,"seed":7}"#).unwrap();
        assert_eq!(cfg, TopologyConfig::new(4, 10.0, 0.05, 7));
        assert!(serde_json::from_str::<TopologyConfig>(
            r#"{"n":4,"p_max_db":10,"i_th":0.05,"seed":7,"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let cfg = TopologyConfig::new(3, 10.0, 0.05, 9);
        let inst: NetworkInstance<f32> = sample_network(&cfg).unwrap();
        let p = inst.peak_powers();
        assert!(inst.ipn(&p, 0).unwrap() >= inst.sigma2());
    }
}
