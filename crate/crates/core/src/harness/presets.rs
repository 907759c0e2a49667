use super::config::{
    ChoiceLaw, EtaSpec, ExperimentConfig, Law, SecondMomentConfig, SimulationConfig, StrategyToggles, UniformLaw,
    WoSpec,
};
use crate::error::{Error, Result};
use crate::network::TopologySpec;

pub const PRESETS: [&str; 2] = ["paper-fig3", "desk"];

fn q_law() -> Law {
    Law::Choice(ChoiceLaw {
        choice: vec![0.3, 0.5, 0.7, 0.9],
    })
}

fn eta_law() -> EtaSpec {
    EtaSpec::Uniform(UniformLaw { uniform: [0.4, 0.8] })
}

/// White regressor powers and noise levels, drawn per agent.
fn sigma_u2_law() -> Law {
    Law::Uniform(UniformLaw { uniform: [0.8, 1.8] })
}

fn sigma_xi2_law() -> Law {
    Law::Uniform(UniformLaw { uniform: [0.01, 0.1] })
}

/// Named reference experiments.
///
/// `paper-fig3` is the full-scale setup: 100 agents, `M = 2`, `μ = 0.002`,
/// 100 trials of 6000 iterations. The topology is a seeded random geometric
/// graph. `desk` is a 20-agent version sized to finish in a few minutes on
/// one core. Its tail window is widened to 30% to cut trial noise; it also carries a step-size sweep for the MSD scaling check.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let config = match name {
        "paper-fig3" => ExperimentConfig {
            topology: TopologySpec::RandomGeometric {
                n: 100,
                radius: 0.2,
                seed: 11,
                max_retries: None,
            },
            seed: 0,
            parameter_seed: Some(11),
            m: 2,
            w_o: WoSpec::default(),
            mu: 0.002,
            q: q_law(),
            eta: eta_law(),
            sigma_u2: Some(sigma_u2_law()),
            r_u: None,
            sigma_xi2: sigma_xi2_law(),
            alpha: 0.0,
            real_data: false,
            second_moment: SecondMomentConfig::default(),
            simulation: SimulationConfig {
                trials: 100,
                iterations: 6000,
                tail_fraction: 0.1,
                fusion_t: 100,
                fusion_pool: None,
            },
            strategies: StrategyToggles::default(),
            mu_sweep: Vec::new(),
            rate_mu_sweep: vec![0.001, 0.002, 0.004],
        },
        "desk" => ExperimentConfig {
            topology: TopologySpec::RandomGeometric {
                n: 20,
                radius: 0.5,
                seed: 4,
                max_retries: None,
            },
            seed: 0,
            parameter_seed: Some(3),
            m: 2,
            w_o: WoSpec::default(),
            mu: 0.005,
            q: q_law(),
            eta: eta_law(),
            sigma_u2: Some(sigma_u2_law()),
            r_u: None,
            sigma_xi2: sigma_xi2_law(),
            alpha: 0.0,
            real_data: false,
            second_moment: SecondMomentConfig::default(),
            simulation: SimulationConfig {
                trials: 50,
                iterations: 3000,
                tail_fraction: 0.3,
                fusion_t: 100,
                fusion_pool: None,
            },
            strategies: StrategyToggles::default(),
            mu_sweep: vec![0.0025, 0.005],
            rate_mu_sweep: vec![0.001, 0.002, 0.004],
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_values() {
        let p = preset("paper-fig3").unwrap();
        assert_eq!(p.mu, 0.002);
        assert_eq!(p.simulation.fusion_t, 100);
        assert_eq!(p.n_agents(), 100);
        assert_eq!((p.simulation.trials, p.simulation.iterations), (100, 6000));
        let d = preset("desk").unwrap();
        assert_eq!(d.n_agents(), 20);
        assert_eq!((d.m, d.mu), (2, 0.005));
        assert_eq!((d.simulation.trials, d.simulation.iterations), (50, 3000));
        assert!(matches!(preset("nope"), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn presets_materialize_and_round_trip() {
        for name in PRESETS {
            let p = preset(name).unwrap();
            let e = p.materialize().unwrap();
            assert_eq!(e.model.n_agents(), p.n_agents());
            let again = ExperimentConfig::from_json_str(&p.to_json_string()).unwrap();
            assert_eq!(again, p);
        }
    }
}
