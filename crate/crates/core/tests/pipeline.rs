use antijam::config::{Preset, ScenarioConfig};
use antijam::harness::{run_scenario, run_scenario_detailed, run_sweep, Baseline, JammerKind, SweepAxis, SweepSpec};

fn desk() -> ScenarioConfig {
    Preset::Desk.config()
}

#[test]
fn jammer_free_rate_is_positive() {
    let report = run_scenario(&desk(), Baseline::NoJammer, JammerKind::None, 1).unwrap();
    assert!(report.rb_bits > 0.0);
    assert!(report.ra_bits > 0.0);
    assert!(report.allocator_converged);
}

#[test]
fn same_seed_gives_identical_reports() {
    for baseline in Baseline::ALL {
        let a = run_scenario(&desk(), baseline, JammerKind::WorstCase, 7).unwrap();
        let b = run_scenario(&desk(), baseline, JammerKind::WorstCase, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rb_bits.to_bits(), b.rb_bits.to_bits());
    }
}

#[test]
fn sequential_and_parallel_runs_agree() {
    let par = run_scenario(&desk(), Baseline::SensingAssisted, JammerKind::WorstCase, 4).unwrap();
    let seq = antijam::exec::sequential(|| {
        run_scenario(&desk(), Baseline::SensingAssisted, JammerKind::WorstCase, 4).unwrap()
    });
    assert_eq!(par, seq);
}

#[test]
fn single_point_sweep_is_a_single_run() {
    let mut spec = SweepSpec::new(SweepAxis::JammerAntennas, vec![64.0], 1);
    spec.curves = vec![(Baseline::SensingAssisted, JammerKind::Barrage)];
    spec.base_seed = 11;
    let table = run_sweep(&spec, &desk()).unwrap();
    assert_eq!(table.rows.len(), 1);
    let direct = run_scenario(&desk(), Baseline::SensingAssisted, JammerKind::Barrage, 11).unwrap();
    assert_eq!(table.rows[0].rb_bits, direct.rb_bits);
    assert_eq!(table.rows[0].ra_bits, direct.ra_bits);
}

#[test]
fn outputs_satisfy_every_constraint() {
    let cfg = desk();
    for baseline in Baseline::ALL {
        for jammer in [JammerKind::WorstCase, JammerKind::Barrage, JammerKind::None] {
            let out = run_scenario_detailed(&cfg, baseline, jammer, 2).unwrap();
            out.allocation.validate(&out.partition, cfg.system.user_power_mw).unwrap();
            out.strategy.validate(cfg.system.jammer_power_mw).unwrap();
        }
    }
}

#[test]
fn receivers_use_the_covariance_their_baseline_knows() {
    let cfg = desk();
    let fk = run_scenario_detailed(&cfg, Baseline::FullKnowledge, JammerKind::WorstCase, 3).unwrap();
    assert_eq!(fk.receiver_cz, fk.true_cz);
    let np = run_scenario_detailed(&cfg, Baseline::NoProtection, JammerKind::WorstCase, 3).unwrap();
    let white = antijam::linalg::identity(cfg.system.rx_antennas).scale(cfg.system.noise_mw);
    assert!(np.receiver_cz.iter().all(|c| *c == white));
    assert!(np.true_cz.iter().any(|c| *c != white));
}

#[test]
fn jamming_never_helps_and_protection_pays_off() {
    let mut spec = SweepSpec::new(SweepAxis::JammerAntennas, vec![64.0], 8);
    spec.curves = vec![
        (Baseline::NoJammer, JammerKind::None),
        (Baseline::NoProtection, JammerKind::WorstCase),
        (Baseline::NoProtection, JammerKind::Barrage),
        (Baseline::FullKnowledge, JammerKind::WorstCase),
        (Baseline::SensingAssisted, JammerKind::WorstCase),
        (Baseline::SensingAssisted, JammerKind::Barrage),
    ];
    let table = run_sweep(&spec, &desk()).unwrap();
    assert!(table.failures.is_empty());
    for trial in 0..spec.trials {
        let clean = table
            .rows
            .iter()
            .find(|r| r.trial == trial && r.baseline == Baseline::NoJammer)
            .unwrap()
            .rb_bits;
        for r in table.rows.iter().filter(|r| r.trial == trial) {
            assert!(r.rb_bits <= clean * (1.0 + 1e-9), "{r:?} beats the jammer-free rate {clean}");
        }
    }
    let sa = table.mean_rb(64.0, Baseline::SensingAssisted, JammerKind::WorstCase);
    let np = table.mean_rb(64.0, Baseline::NoProtection, JammerKind::WorstCase);
    assert!(sa > np);
}

#[test]
fn sensing_assisted_rate_does_not_grow_with_jamming_power() {
    let mut spec = SweepSpec::new(SweepAxis::JammerPowerDbm, vec![10.0, 20.0, 30.0, 40.0], 20);
    spec.curves = vec![(Baseline::SensingAssisted, JammerKind::WorstCase)];
    let table = run_sweep(&spec, &desk()).unwrap();
    for trial in 0..spec.trials {
        let rates: Vec<f64> = spec
            .values
            .iter()
            .map(|&v| table.rows.iter().find(|r| r.trial == trial && r.sweep_value == v).unwrap().rb_bits)
            .collect();
        for w in rates.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "trial {trial}: {rates:?}");
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = desk();
    cfg.system.noise_mw = 0.0;
    assert!(run_scenario(&cfg, Baseline::NoJammer, JammerKind::None, 1).is_err());
    let mut cfg = desk();
    cfg.system.users = 0;
    assert!(run_scenario(&cfg, Baseline::NoJammer, JammerKind::None, 1).is_err());
}
