use meanfield_cli::config::{preset, preset_names, Scenario};
use meanfield_cli::{parse_config, ConfigError, Experiment};
use meanfield_core::controls::{PolicyClassSpec, PolicySpec};

const MINIMAL: &str = r#"
experiment = "mfg-solve"

[scenario]
name = "example33"
"#;

#[test]
fn minimal_config_fills_defaults() {
    let c = parse_config(MINIMAL).unwrap();
    assert_eq!(c.experiment, Experiment::MfgSolve);
    assert_eq!(c.scenario, Scenario::Example33 { sigma: 1.0 });
    assert_eq!(c.grid.steps, 200);
    assert_eq!(c.mfg.damping, 0.5);
    assert_eq!(c.policy_class, PolicyClassSpec::Sign);
    assert_eq!(c.n_list, vec![16, 32, 64, 128, 256]);
    assert_eq!(c.profile(), PolicySpec::Constant { action: vec![1.0] });
}

fn field_of(text: &str) -> &'static str {
    match parse_config(text) {
        Err(ConfigError::Field { field, .. }) => field,
        other => panic!("expected a field error, got {other:?}"),
    }
}

#[test]
fn validation_errors_name_the_field() {
    assert_eq!(field_of(&format!("{MINIMAL}[grid]\nsteps = 0\n")), "grid.steps");
    assert_eq!(field_of(&format!("{MINIMAL}[mc]\nreplications = 0\n")), "mc.replications");
    assert_eq!(field_of(&format!("n_list = [8, 4]\n{MINIMAL}")), "n_list");
    assert_eq!(field_of(&format!("n_list = []\n{MINIMAL}")), "n_list");
    assert_eq!(field_of(&format!("{MINIMAL}[mfg]\ndamping = 0.0\n")), "mfg.damping");
    assert_eq!(field_of(&format!("{MINIMAL}[mfg]\nparticles = 11\n")), "mfg.particles");
    assert_eq!(field_of(&format!("{MINIMAL}[mfg]\nexpected = [1.0]\n")), "mfg.expected");
    assert_eq!(
        field_of(&format!("{MINIMAL}[profile]\nkind = \"sign_threshold\"\nweights = [1.0]\ndirection = [1.0]\n")),
        "profile"
    );
    let text = "experiment = \"propagation\"\n[scenario]\nname = \"mean_coupled\"\n";
    assert_eq!(field_of(text), "scenario.name");
    let text = "experiment = \"chaos-rate\"\nn_list = [8]\n[scenario]\nname = \"mean_coupled\"\n";
    assert_eq!(field_of(text), "n_list");
}

#[test]
fn duplicate_keys_are_parse_errors() {
    let text = format!("{MINIMAL}[grid]\nsteps = 10\nsteps = 20\n");
    assert!(matches!(parse_config(&text), Err(ConfigError::Parse(_))));
}

#[test]
fn unknown_keys_are_rejected_with_their_location() {
    let text = format!("{MINIMAL}[grid]\nstep = 10\n");
    let Err(ConfigError::Parse(msg)) = parse_config(&text) else { panic!("expected a parse error") };
    assert!(msg.contains("line 7"), "{msg}");
    assert!(msg.contains("step"), "{msg}");
    let text = format!("{MINIMAL}sigma_0 = 2.0\n");
    assert!(matches!(parse_config(&text), Err(ConfigError::Parse(_))));
}

#[test]
fn every_preset_parses_and_runs_its_own_experiment() {
    let mut count = 0;
    for name in preset_names() {
        let c = parse_config(preset(name).unwrap()).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(c.experiment.default_preset(), name);
        count += 1;
    }
    assert_eq!(count, 10);
    assert!(preset("no_such_preset").is_none());
}

#[test]
fn serialized_config_parses_back_to_itself() {
    for name in preset_names() {
        let c = parse_config(preset(name).unwrap()).unwrap();
        let again = parse_config(&c.to_toml()).unwrap();
        assert_eq!(c, again, "{name}");
    }
}
