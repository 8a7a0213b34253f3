use acp_core::{ControlConfig, Micros, RateBounds};
use acp_netsim::{
    replay_endpoint, run, run_seeds, ReversePath, Service, SimConfig, SimError, Topology, Workload,
};
use acp_wire::{RateController, SourceConfig};

fn acp() -> SourceConfig {
    SourceConfig::new(RateController::Acp(ControlConfig::default()))
}

fn lazy() -> SourceConfig {
    SourceConfig::new(RateController::Lazy(RateBounds::default()))
}

#[test]
fn decision_trace_replays_identically() {
    let cfg = SimConfig {
        record_inputs: true,
        ..SimConfig::new(Micros::from_secs(20_000), 6)
    };
    let r = run(
        &Topology::tandem(1.0, 1.0),
        &Workload::Controlled(acp()),
        &cfg,
    )
    .unwrap();
    assert!(r.epochs.len() > 500);
    let replayed = replay_endpoint(acp(), &r.inputs).unwrap();
    assert_eq!(replayed.epochs, r.epochs);
    assert_eq!(replayed.sends.len() as u64, r.updates_generated);
}

#[test]
fn lazy_keeps_about_one_update_in_flight() {
    for (topo, secs) in [
        (Topology::mm1(1.0), 50_000),
        (Topology::net("net-a").unwrap(), 60),
        (Topology::net("net-d").unwrap(), 60),
    ] {
        let r = run(
            &topo,
            &Workload::Controlled(lazy()),
            &SimConfig::new(Micros::from_secs(secs), 3),
        )
        .unwrap();
        assert!(
            (r.source_backlog - 1.0).abs() <= 0.2,
            "{}: {}",
            topo.name,
            r.source_backlog
        );
    }
}

#[test]
fn acp_runs_without_stalls_and_tracks_age() {
    let r = run(
        &Topology::net("net-a").unwrap(),
        &Workload::Controlled(acp()),
        &SimConfig::new(Micros::from_secs(60), 4),
    )
    .unwrap();
    assert_eq!(r.stalls, 0);
    assert!(r.init_lambda.is_some());
    assert!(r.epochs.iter().filter(|e| e.decision.is_some()).count() > 100);
    // the source sees age through one extra reverse trip
    assert!(r.source_est_age > r.time_avg_age);
    assert!(r.source_est_age - r.time_avg_age < r.mean_rtt);
}

#[test]
fn ack_loss_is_tolerated() {
    let mut topo = Topology::tandem(1.0, 2.0);
    topo.reverse = ReversePath::Symmetric;
    topo.forward[1].loss = 0.1;
    let r = run(
        &topo,
        &Workload::Controlled(acp()),
        &SimConfig::new(Micros::from_secs(50_000), 9),
    )
    .unwrap();
    assert!(r.acks_dropped > 0 && r.updates_dropped > 0);
    assert_eq!(
        r.updates_generated,
        r.updates_delivered + r.updates_dropped + r.updates_in_flight
    );
    assert!(r.time_avg_age.is_finite());
}

#[test]
fn slow_paths_need_a_longer_probe_timeout() {
    let topo = Topology::chain(
        "slow",
        6,
        Service::Exponential { rate: 1.0 },
        ReversePath::Symmetric,
    );
    let cfg = SimConfig::new(Micros::from_secs(5_000), 1);
    let err = run(&topo, &Workload::Controlled(acp()), &cfg).unwrap_err();
    assert_eq!(err, SimError::ConnectionFailed);
    let patient = SourceConfig {
        probe_timeout: Micros::from_secs(60),
        ..acp()
    };
    assert!(run(&topo, &Workload::Controlled(patient), &cfg).is_ok());
}

#[test]
fn seeds_run_in_parallel_deterministically() {
    let cfg = SimConfig::new(Micros::from_secs(5_000), 0);
    let seeds = [1, 2, 3, 4];
    let a = run_seeds(
        &Topology::mm1(1.0),
        &Workload::Controlled(acp()),
        &cfg,
        &seeds,
    )
    .unwrap();
    let b = run_seeds(
        &Topology::mm1(1.0),
        &Workload::Controlled(acp()),
        &cfg,
        &seeds,
    )
    .unwrap();
    assert_eq!(a, b);
}
