use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::SecondMomentMode;
use crate::network::{BernoulliAsyncModel, Topology, TopologySpec};
use crate::rng::{stream, Purpose};
use crate::sim::{InitialWeights, ScenarioTruth, SimulationSettings, StrategyKind};
use crate::theory::AgentDataProfile;

/// Scalar per-agent quantity: a constant, an explicit per-agent list, or a
/// law sampled once per agent at materialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Law {
    Constant(f64),
    PerAgent(Vec<f64>),
    Uniform(UniformLaw),
    Choice(ChoiceLaw),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformLaw {
    pub uniform: [f64; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChoiceLaw {
    pub choice: Vec<f64>,
}

impl Law {
    fn values(&self) -> Vec<f64> {
        match self {
            Law::Constant(c) => vec![*c],
            Law::PerAgent(v) => v.clone(),
            Law::Uniform(u) => u.uniform.to_vec(),
            Law::Choice(c) => c.choice.clone(),
        }
    }

    fn check(&self, field: &str, n: usize, ok: impl Fn(f64) -> bool, what: &str) -> Result<()> {
        match self {
            Law::PerAgent(v) if v.len() != n => {
                return Err(Error::validation(
                    field,
                    format!("expected {n} per-agent values, got {}", v.len()),
                ))
            }
            Law::Choice(c) if c.choice.is_empty() => return Err(Error::validation(field, "empty choice set")),
            Law::Uniform(u) if u.uniform[0] > u.uniform[1] => {
                return Err(Error::validation(field, "uniform bounds are reversed"))
            }
            _ => {}
        }
        if let Some(bad) = self.values().into_iter().find(|v| !ok(*v)) {
            return Err(Error::validation(field, format!("{bad} is not {what}")));
        }
        Ok(())
    }

    fn draw<R: Rng + ?Sized>(&self, index: usize, rng: &mut R) -> f64 {
        match self {
            Law::Constant(c) => *c,
            Law::PerAgent(v) => v[index],
            Law::Uniform(u) => {
                let [a, b] = u.uniform;
                if a == b {
                    a
                } else {
                    rng.gen_range(a..b)
                }
            }
            Law::Choice(c) => c.choice[rng.gen_range(0..c.choice.len())],
        }
    }

    fn is_random(&self) -> bool {
        matches!(self, Law::Uniform(_) | Law::Choice(_))
    }
}

/// Link activation probabilities `η_ℓk`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EtaSpec {
    Constant(f64),
    Uniform(UniformLaw),
    Choice(ChoiceLaw),
    PerLink(PerLinkEta),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerLinkEta {
    /// `(ℓ, k, η_ℓk)`: probability that agent `k` hears agent `ℓ`.
    pub per_link: Vec<(usize, usize, f64)>,
    /// Used for links not listed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<f64>,
}

impl EtaSpec {
    fn as_law(&self) -> Option<Law> {
        match self {
            EtaSpec::Constant(c) => Some(Law::Constant(*c)),
            EtaSpec::Uniform(u) => Some(Law::Uniform(u.clone())),
            EtaSpec::Choice(c) => Some(Law::Choice(c.clone())),
            EtaSpec::PerLink(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WoSpec {
    /// `"random_unit"`: complex Gaussian direction with unit norm.
    Named(String),
    Real(Vec<f64>),
    /// `[re, im]` pairs.
    Complex(Vec<[f64; 2]>),
}

impl Default for WoSpec {
    fn default() -> Self {
        WoSpec::Named("random_unit".into())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecondMomentKind {
    Exact,
    MonteCarlo,
    Auto,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SecondMomentConfig {
    pub mode: SecondMomentKind,
    pub threshold: usize,
    pub samples: usize,
}

impl Default for SecondMomentConfig {
    fn default() -> Self {
        Self {
            mode: SecondMomentKind::Auto,
            threshold: crate::moments::DEFAULT_ENUMERATION_THRESHOLD,
            samples: crate::moments::DEFAULT_MC_SAMPLES,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub trials: usize,
    pub iterations: usize,
    pub tail_fraction: f64,
    pub fusion_t: usize,
    /// Pre-sampled fusion vectors; `true` selects [`DEFAULT_FUSION_POOL`].
    #[serde(skip_serializing_if = "Option::is_none", deserialize_with = "pool_size")]
    pub fusion_pool: Option<usize>,
}

pub const DEFAULT_FUSION_POOL: usize = 2048;

fn pool_size<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<usize>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Pool {
        Flag(bool),
        Size(usize),
    }
    Ok(match Option::<Pool>::deserialize(d)? {
        None | Some(Pool::Flag(false)) => None,
        Some(Pool::Flag(true)) => Some(DEFAULT_FUSION_POOL),
        Some(Pool::Size(n)) => Some(n),
    })
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            trials: 100,
            iterations: 6000,
            tail_fraction: 0.1,
            fusion_t: 100,
            fusion_pool: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StrategyToggles {
    pub dist_async: bool,
    pub dist_sync: bool,
    pub cent_async: bool,
    pub cent_sync: bool,
}

impl Default for StrategyToggles {
    fn default() -> Self {
        Self {
            dist_async: true,
            dist_sync: true,
            cent_async: true,
            cent_sync: true,
        }
    }
}

impl StrategyToggles {
    pub fn enabled(&self) -> Vec<StrategyKind> {
        StrategyKind::ALL.into_iter().filter(|k| self.is_enabled(*k)).collect()
    }

    pub fn is_enabled(&self, kind: StrategyKind) -> bool {
        match kind {
            StrategyKind::DistAsync => self.dist_async,
            StrategyKind::DistSync => self.dist_sync,
            StrategyKind::CentAsync => self.cent_async,
            StrategyKind::CentSync => self.cent_sync,
        }
    }

    pub fn only(kinds: &[StrategyKind]) -> Self {
        Self {
            dist_async: kinds.contains(&StrategyKind::DistAsync),
            dist_sync: kinds.contains(&StrategyKind::DistSync),
            cent_async: kinds.contains(&StrategyKind::CentAsync),
            cent_sync: kinds.contains(&StrategyKind::CentSync),
        }
    }
}

fn default_sigma_xi2() -> Law {
    Law::Constant(1e-3)
}

fn default_one() -> Law {
    Law::Constant(1.0)
}

fn default_eta() -> EtaSpec {
    EtaSpec::Constant(1.0)
}

fn default_rate_sweep() -> Vec<f64> {
    vec![0.001, 0.002, 0.004]
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub topology: TopologySpec,
    /// Base seed of the simulation trials.
    #[serde(default)]
    pub seed: u64,
    /// Seed for the one-off parameter draws; defaults to `seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter_seed: Option<u64>,
    #[serde(alias = "M")]
    pub m: usize,
    #[serde(default)]
    pub w_o: WoSpec,
    pub mu: f64,
    #[serde(default = "default_one")]
    pub q: Law,
    #[serde(default = "default_eta")]
    pub eta: EtaSpec,
    /// White regressor powers; mutually exclusive with `r_u`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_u2: Option<Law>,
    /// Common real symmetric regressor covariance, row-major.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_u: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_sigma_xi2")]
    pub sigma_xi2: Law,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub real_data: bool,
    #[serde(default)]
    pub second_moment: SecondMomentConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub strategies: StrategyToggles,
    /// Extra step-sizes for the MSD scaling check; iterations scale as `mu / μ`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mu_sweep: Vec<f64>,
    /// Step-sizes for the convergence-rate gap check (theory only).
    #[serde(default = "default_rate_sweep")]
    pub rate_mu_sweep: Vec<f64>,
}

const REQUIRED: [&str; 3] = ["topology", "mu", "m"];

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Parse("config must be a JSON object".into()))?;
        for key in REQUIRED {
            let present = obj.contains_key(key) || (key == "m" && obj.contains_key("M"));
            if !present {
                return Err(Error::validation(key, "missing required field"));
            }
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse(format!("{path}: {}", e.into_inner()))
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn n_agents(&self) -> usize {
        self.topology.n_agents()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_agents();
        if n == 0 {
            return Err(Error::EmptyNetwork);
        }
        if self.m == 0 {
            return Err(Error::validation("m", "must be at least 1"));
        }
        let prob = |v: f64| v > 0.0 && v <= 1.0;
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.mu) {
            return Err(Error::validation("mu", format!("{} is not positive", self.mu)));
        }
        self.q.check("q", n, prob, "a probability in (0, 1]")?;
        match &self.eta {
            EtaSpec::PerLink(p) => {
                for &(l, k, e) in &p.per_link {
                    if l >= n || k >= n {
                        return Err(Error::validation("eta", format!("link ({l}, {k}) is out of range")));
                    }
                    if !prob(e) {
                        return Err(Error::validation("eta", format!("{e} is not a probability in (0, 1]")));
                    }
                }
                if let Some(d) = p.default {
                    if !prob(d) {
                        return Err(Error::validation("eta", format!("{d} is not a probability in (0, 1]")));
                    }
                }
            }
            other => other
                .as_law()
                .expect("scalar law")
                .check("eta", usize::MAX, prob, "a probability in (0, 1]")?,
        }
        if self.sigma_u2.is_some() && self.r_u.is_some() {
            return Err(Error::validation("r_u", "give either sigma_u2 or r_u, not both"));
        }
        if let Some(law) = &self.sigma_u2 {
            law.check("sigma_u2", n, positive, "positive")?;
        }
        if let Some(r) = &self.r_u {
            if r.len() != self.m || r.iter().any(|row| row.len() != self.m) {
                return Err(Error::validation("r_u", format!("must be {0}x{0}", self.m)));
            }
            AgentDataProfile {
                r_u: self.r_u_matrix().expect("present"),
                sigma_xi2: 1.0,
            }
            .validate()
            .map_err(|e| Error::validation("r_u", e.to_string()))?;
        }
        self.sigma_xi2.check("sigma_xi2", n, positive, "positive")?;
        match &self.w_o {
            WoSpec::Named(name) if name != "random_unit" => {
                return Err(Error::validation("w_o", format!("unknown spec {name:?}")))
            }
            WoSpec::Real(v) if v.len() != self.m => {
                return Err(Error::validation("w_o", format!("expected {} entries", self.m)))
            }
            WoSpec::Complex(v) if v.len() != self.m => {
                return Err(Error::validation("w_o", format!("expected {} entries", self.m)))
            }
            _ => {}
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::validation("alpha", "must be nonnegative"));
        }
        let sim = &self.simulation;
        if sim.trials == 0 {
            return Err(Error::validation("simulation.trials", "must be at least 1"));
        }
        if sim.iterations == 0 {
            return Err(Error::validation("simulation.iterations", "must be at least 1"));
        }
        if !(sim.tail_fraction > 0.0 && sim.tail_fraction <= 1.0) {
            return Err(Error::validation("simulation.tail_fraction", "must lie in (0, 1]"));
        }
        if sim.fusion_t == 0 {
            return Err(Error::validation("simulation.fusion_t", "must be at least 1"));
        }
        if sim.fusion_pool == Some(0) {
            return Err(Error::validation("simulation.fusion_pool", "must be at least 1"));
        }
        if self.second_moment.samples == 0 {
            return Err(Error::validation("second_moment.samples", "must be at least 1"));
        }
        for (field, list) in [("mu_sweep", &self.mu_sweep), ("rate_mu_sweep", &self.rate_mu_sweep)] {
            if let Some(bad) = list.iter().find(|v| !positive(**v)) {
                return Err(Error::validation(field, format!("{bad} is not positive")));
            }
        }
        Ok(())
    }

    fn r_u_matrix(&self) -> Option<DMatrix<f64>> {
        self.r_u
            .as_ref()
            .map(|r| DMatrix::from_fn(self.m, self.m, |i, j| r[i][j]))
    }

    pub fn parameter_seed(&self) -> u64 {
        self.parameter_seed.unwrap_or(self.seed)
    }

    pub fn second_moment_mode(&self) -> SecondMomentMode {
        let c = &self.second_moment;
        let seed = self.parameter_seed();
        match c.mode {
            SecondMomentKind::Exact => SecondMomentMode::Exact { threshold: c.threshold },
            SecondMomentKind::MonteCarlo => SecondMomentMode::MonteCarlo {
                samples: c.samples,
                seed,
            },
            SecondMomentKind::Auto => SecondMomentMode::Auto {
                threshold: c.threshold,
                samples: c.samples,
                seed,
            },
        }
    }

    pub fn simulation_settings(&self) -> SimulationSettings {
        SimulationSettings {
            n_iters: self.simulation.iterations,
            fusion_t: self.simulation.fusion_t,
            fusion_pool: self.simulation.fusion_pool,
            initial: InitialWeights::Zero,
        }
    }

    /// Draws every random parameter once and builds the model and data truth.
    pub fn materialize(&self) -> Result<Experiment> {
        self.validate()?;
        let topology = self.topology.build()?;
        let n = topology.n_agents();
        let mut rng = stream(self.parameter_seed(), 0, Purpose::Config);

        let w_o: Vec<Complex64> = match &self.w_o {
            WoSpec::Named(_) => {
                let mut v: Vec<Complex64> = (0..self.m)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = if self.real_data {
                            0.0
                        } else {
                            rng.sample(StandardNormal)
                        };
                        Complex64::new(re, im)
                    })
                    .collect();
                let norm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
                v.iter_mut().for_each(|x| *x /= norm);
                v
            }
            WoSpec::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            WoSpec::Complex(v) => v.iter().map(|&[re, im]| Complex64::new(re, im)).collect(),
        };

        let q: Vec<f64> = (0..n).map(|k| self.q.draw(k, &mut rng)).collect();

        let mut eta = BTreeMap::new();
        let listed: BTreeMap<(usize, usize), f64> = match &self.eta {
            EtaSpec::PerLink(p) => p.per_link.iter().map(|&(l, k, e)| ((l, k), e)).collect(),
            _ => BTreeMap::new(),
        };
        for k in 0..n {
            for &l in topology.neighborhood(k) {
                if l == k {
                    continue;
                }
                let value = match &self.eta {
                    EtaSpec::PerLink(p) => match listed.get(&(l, k)).copied().or(p.default) {
                        Some(v) => v,
                        None => {
                            return Err(Error::validation(
                                "eta",
                                format!("no probability for link ({l}, {k}) and no default"),
                            ))
                        }
                    },
                    other => other.as_law().expect("scalar law").draw(0, &mut rng),
                };
                eta.insert((l, k), value);
            }
        }
        if let Some(&(l, k)) = listed.keys().find(|key| !eta.contains_key(key)) {
            return Err(Error::validation(
                "eta",
                format!("({l}, {k}) is not a link of the topology"),
            ));
        }

        let sigma_u2: Option<Vec<f64>> = match (&self.sigma_u2, &self.r_u) {
            (_, Some(_)) => None,
            (Some(law), None) => Some((0..n).map(|k| law.draw(k, &mut rng)).collect()),
            (None, None) => Some(vec![1.0; n]),
        };
        let sigma_xi2: Vec<f64> = (0..n).map(|k| self.sigma_xi2.draw(k, &mut rng)).collect();

        let profiles: Vec<AgentDataProfile> = (0..n)
            .map(|k| match (&sigma_u2, self.r_u_matrix()) {
                (Some(s), _) => AgentDataProfile::white(self.m, s[k], sigma_xi2[k]),
                (None, Some(r)) => AgentDataProfile {
                    r_u: r,
                    sigma_xi2: sigma_xi2[k],
                },
                (None, None) => unreachable!(),
            })
            .collect();

        let model = BernoulliAsyncModel::new(topology.clone(), q.clone(), vec![self.mu; n], |l, k| eta[&(l, k)])?;
        let truth = ScenarioTruth::new(w_o.clone(), profiles, self.real_data)?;
        let parameters = FrozenParameters {
            n_agents: n,
            edges: topology.edges().to_vec(),
            positions: topology.positions().map(|p| p.to_vec()),
            w_o: w_o.iter().map(|c| [c.re, c.im]).collect(),
            q,
            eta: eta.into_iter().map(|((l, k), e)| (l, k, e)).collect(),
            sigma_u2,
            sigma_xi2,
        };
        Ok(Experiment {
            config: self.clone(),
            model,
            truth,
            topology,
            parameters,
        })
    }

    pub fn has_random_parameters(&self) -> bool {
        self.q.is_random()
            || matches!(self.eta, EtaSpec::Uniform(_) | EtaSpec::Choice(_))
            || self.sigma_u2.as_ref().is_some_and(Law::is_random)
            || self.sigma_xi2.is_random()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json_str(&text)
}

/// The parameters actually used, after every random law has been drawn.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FrozenParameters {
    pub n_agents: usize,
    pub edges: Vec<(usize, usize)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<(f64, f64)>>,
    /// `[re, im]` pairs.
    pub w_o: Vec<[f64; 2]>,
    pub q: Vec<f64>,
    /// `(ℓ, k, η_ℓk)`.
    pub eta: Vec<(usize, usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_u2: Option<Vec<f64>>,
    pub sigma_xi2: Vec<f64>,
}

/// A materialized configuration.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: BernoulliAsyncModel,
    pub truth: ScenarioTruth,
    pub topology: Topology,
    pub parameters: FrozenParameters,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"topology": {"kind": "full", "n": 2}, "M": 1, "mu": 0.01, "q": 1, "eta": 1}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        assert_eq!(c.simulation.trials, 100);
        assert_eq!(c.simulation.iterations, 6000);
        assert_eq!(c.simulation.tail_fraction, 0.1);
        assert_eq!(c.simulation.fusion_t, 100);
        assert_eq!(c.simulation.fusion_pool, None);
        for (spec, pool) in [
            ("true", Some(DEFAULT_FUSION_POOL)),
            ("false", None),
            ("64", Some(64)),
            ("null", None),
        ] {
            let text = format!(
                r#"{{"topology": {{"kind": "ring", "n": 3}}, "m": 1, "mu": 0.01, "simulation": {{"fusion_pool": {spec}}}}}"#
            );
            assert_eq!(
                ExperimentConfig::from_json_str(&text).unwrap().simulation.fusion_pool,
                pool
            );
        }
        assert_eq!(c.m, 1);
        assert_eq!(c.strategies.enabled().len(), 4);
        assert_eq!(c.alpha, 0.0);
    }

    #[test]
    fn invalid_probability_names_the_field() {
        let text = MINIMAL.replace(r#""q": 1"#, r#""q": 1.5"#);
        match ExperimentConfig::from_json_str(&text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "q"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_topology_is_a_validation_error() {
        let text = r#"{"M": 1, "mu": 0.01}"#;
        match ExperimentConfig::from_json_str(text) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "topology"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_bad_json_are_parse_errors() {
        let text = MINIMAL.replace(r#""mu""#, r#""bogus": 3, "mu""#);
        assert!(matches!(ExperimentConfig::from_json_str(&text), Err(Error::Parse(_))));
        let text = MINIMAL.replace('}', r#", "simulation": {"trails": 3}}"#);
        match ExperimentConfig::from_json_str(&text) {
            Err(Error::Parse(msg)) => assert!(msg.contains("simulation"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(ExperimentConfig::from_json_str("{"), Err(Error::Parse(_))));
    }

    #[test]
    fn laws_are_drawn_once_and_reproducibly() {
        let text = r#"{
            "topology": {"kind": "ring", "n": 6},
            "m": 2, "mu": 0.01, "parameter_seed": 4,
            "q": {"choice": [0.3, 0.5, 0.7, 0.9]},
            "eta": {"uniform": [0.4, 0.8]},
            "sigma_u2": {"uniform": [0.5, 1.5]},
            "sigma_xi2": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
        }"#;
        let c = ExperimentConfig::from_json_str(text).unwrap();
        let a = c.materialize().unwrap();
        let b = c.materialize().unwrap();
        assert_eq!(a.parameters, b.parameters);
        let p = &a.parameters;
        assert!(p.q.iter().all(|q| [0.3, 0.5, 0.7, 0.9].contains(q)));
        assert_eq!(p.eta.len(), 12);
        assert!(p.eta.iter().all(|&(_, _, e)| (0.4..0.8).contains(&e)));
        assert_eq!(p.sigma_xi2[5], 0.6);
        let norm: f64 = p.w_o.iter().map(|[r, i]| r * r + i * i).sum();
        assert!((norm - 1.0).abs() < 1e-12);
        for &(l, k, e) in &p.eta {
            assert_eq!(a.model.eta(l, k), Some(e));
        }
        assert!(c.has_random_parameters());
    }

    #[test]
    fn per_link_eta_needs_full_coverage() {
        let base = r#"{"topology": {"kind": "ring", "n": 3}, "m": 1, "mu": 0.01, "eta": ETA}"#;
        let full = base.replace("ETA", r#"{"per_link": [[0, 1, 0.5]], "default": 0.7}"#);
        let e = ExperimentConfig::from_json_str(&full).unwrap().materialize().unwrap();
        assert_eq!(e.model.eta(0, 1), Some(0.5));
        assert_eq!(e.model.eta(1, 0), Some(0.7));
        let partial = base.replace("ETA", r#"{"per_link": [[0, 1, 0.5]]}"#);
        let c = ExperimentConfig::from_json_str(&partial).unwrap();
        assert!(matches!(c.materialize(), Err(Error::Validation { .. })));
    }

    #[test]
    fn explicit_r_u_and_w_o() {
        let text = r#"{"topology": {"kind": "full", "n": 2}, "m": 2, "mu": 0.01,
            "r_u": [[1.0, 0.2], [0.2, 2.0]], "w_o": [[1, 0], [0, 1]]}"#;
        let e = ExperimentConfig::from_json_str(text).unwrap().materialize().unwrap();
        assert_eq!(e.truth.profiles[1].r_u[(0, 1)], 0.2);
        assert_eq!(e.truth.w_o[1], Complex64::new(0.0, 1.0));
        let bad = text.replace("0.2, 2.0", "0.2, -2.0");
        assert!(matches!(
            ExperimentConfig::from_json_str(&bad),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn round_trips_through_json() {
        let c = ExperimentConfig::from_json_str(MINIMAL).unwrap();
        let again = ExperimentConfig::from_json_str(&c.to_json_string()).unwrap();
        assert_eq!(c, again);
    }
}
