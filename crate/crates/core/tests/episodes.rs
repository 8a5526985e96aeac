use trlinucb::harness::{draw_instance, run_experiment, ExperimentSpec};
use trlinucb::{
    run_episode, EpisodeOptions, EpisodeStreams, InstanceSpec, PolicyConfig, RngStream, Role, TraceResolution,
};

fn policies() -> Vec<PolicyConfig> {
    vec![
        PolicyConfig::tr_linucb(),
        PolicyConfig::linucb(),
        PolicyConfig::greedy(),
        PolicyConfig::ols(),
        PolicyConfig::greedy_first(),
    ]
}

#[test]
fn regret_is_nonnegative_and_cumulative_monotone() {
    let specs = [
        InstanceSpec::sim_setup(4, 2),
        InstanceSpec::sphere_annulus(3),
        InstanceSpec::hemisphere(4, 0.7),
        InstanceSpec::discrete_mix(5, 3, 2),
    ];
    for spec in &specs {
        let inst = draw_instance(spec, 9, 0, 600).unwrap();
        for (i, p) in policies().iter().enumerate() {
            let tie = RngStream::for_role(9, 0, 600, Role::PolicyTies, i as u64);
            let mut policy = p.build(spec.d, spec.k_arms, 600, tie).unwrap();
            let mut streams = EpisodeStreams::new(9, 0, 600, spec.k_arms);
            let options = EpisodeOptions {
                resolution: TraceResolution::Full,
                keep_steps: true,
            };
            let trace = run_episode(&inst, policy.as_mut(), 600, &mut streams, options).unwrap();
            let steps = trace.steps.as_ref().unwrap();
            assert!(steps.iter().all(|s| s.instant_regret >= 0.0 && s.action < spec.k_arms));
            assert!(trace.cumulative.windows(2).all(|w| w[1] >= w[0]));
            let direct: f64 = steps.iter().map(|s| s.instant_regret).sum();
            assert!((trace.total - direct).abs() <= 1e-9 * (1.0 + direct));
            assert_eq!(*trace.cumulative.last().unwrap(), trace.total);
        }
    }
}

#[test]
fn policies_see_common_contexts_and_noise() {
    let spec = InstanceSpec::sim_setup(4, 2);
    let inst = draw_instance(&spec, 3, 1, 500).unwrap();
    let run = |p: &PolicyConfig| {
        let tie = RngStream::for_role(3, 1, 500, Role::PolicyTies, 0);
        let mut policy = p.build(4, 2, 500, tie).unwrap();
        let mut streams = EpisodeStreams::new(3, 1, 500, 2);
        let options = EpisodeOptions {
            keep_steps: true,
            ..Default::default()
        };
        run_episode(&inst, policy.as_mut(), 500, &mut streams, options).unwrap()
    };
    let a = run(&PolicyConfig::linucb());
    let b = run(&PolicyConfig::greedy());
    assert_eq!(a.context_digest, b.context_digest);
    let (sa, sb) = (a.steps.unwrap(), b.steps.unwrap());
    for (x, y) in sa.iter().zip(&sb) {
        assert_eq!(x.context, y.context);
        if x.action == y.action {
            assert_eq!(x.realized_reward.to_bits(), y.realized_reward.to_bits());
        }
    }
}

#[test]
fn quadrupling_reps_halves_stderr() {
    let mut spec = ExperimentSpec::new(InstanceSpec::sim_setup(4, 2), vec![PolicyConfig::linucb()], 400, 100, 5);
    spec.resolution = TraceResolution::FinalOnly;
    let small = run_experiment(&spec).unwrap().rows[0].stderr;
    spec.reps = 400;
    let large = run_experiment(&spec).unwrap().rows[0].stderr;
    let ratio = small / large;
    assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
}
