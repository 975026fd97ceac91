mod common;

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use common::random_matrix;
use hqts::qubo::{build_tsp_qubo, route_penalties, Qubo};
use hqts::sampler::protocol::{serve, Request, Response, WireSample};
use hqts::sampler::{
    best_sample, sample_exact, sample_sa, AnnealSchedule, AnnealingSampler, RemoteEndpoint,
    RemoteSampler, SampleSet, Sampler, SamplerError,
};

fn tsp(n: usize, seed: u64) -> Qubo {
    let m = random_matrix(n, seed);
    let customers: Vec<usize> = (1..=n).collect();
    build_tsp_qubo(&customers, &m, 0, route_penalties(&customers, 0, &m)).unwrap().qubo
}

#[test]
fn annealer_finds_four_city_ground_state() {
    let q = tsp(4, 21);
    let target = best_sample(&sample_exact(&q).unwrap()).unwrap().1;
    let sampler = AnnealingSampler::default();
    let hits = (0..100u64)
        .filter(|&seed| {
            let set = sampler.sample(&q, seed).unwrap();
            (best_sample(&set).unwrap().1 - target).abs() < 1e-9
        })
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn reported_best_is_min_over_samples() {
    let q = tsp(3, 2);
    let set = sample_sa(&q, &AnnealSchedule::for_qubo(&q, 200, 4)).unwrap();
    let min = set.iter().map(|s| s.energy).fold(f64::INFINITY, f64::min);
    assert_eq!(best_sample(&set).unwrap().1, min);
}

/// Serves `handle` on a loopback port, one connection at a time.
fn loopback<F>(handle: F) -> String
where
    F: FnMut(&Qubo<f64>, usize) -> Result<SampleSet<f64>, SamplerError> + Send + Clone + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        for stream in listener.incoming() {
            let stream = stream.unwrap();
            let reader = BufReader::new(stream.try_clone().unwrap());
            let _ = serve(reader, stream, handle.clone());
        }
    });
    addr
}

#[test]
fn tcp_round_trip_matches_local_exact() {
    let addr = loopback(|q, _| sample_exact(q));
    let remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    let q = tsp(3, 8);
    for _ in 0..3 {
        let got: SampleSet = remote.sample(&q, 0).unwrap();
        assert_eq!(got, sample_exact(&q).unwrap());
    }
}

#[test]
fn remote_f32_core_accepts_f64_energies() {
    let addr = loopback(|q, _| sample_exact(q));
    let remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    let q: Qubo<f32> = Qubo::from_wire(&tsp(3, 8).to_wire()).unwrap();
    let set = remote.sample(&q, 0).unwrap();
    assert_eq!(set.len(), 100);
}

/// A hand-rolled server that answers with whatever `reply` builds.
fn scripted(reply: impl Fn(Request) -> Vec<String> + Send + 'static) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut writer = stream.try_clone().unwrap();
        for line in BufReader::new(stream).lines() {
            let Ok(line) = line else { break };
            let req: Request = serde_json::from_str(&line).unwrap();
            for out in reply(req) {
                writer.write_all(out.as_bytes()).unwrap();
                writer.write_all(b"\n").unwrap();
            }
        }
    });
    addr
}

#[test]
fn corrupted_energy_is_rejected() {
    let addr = scripted(|req| {
        let q = Qubo::<f64>::from_wire(&req.qubo).unwrap();
        let mut set = Response::from_set(req.id, &sample_exact(&q).unwrap());
        if let Response::Samples { samples, .. } = &mut set {
            samples[0].energy -= 5.0;
        }
        vec![serde_json::to_string(&set).unwrap()]
    });
    let remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    let err = <RemoteSampler as Sampler<f64>>::sample(&remote, &tsp(3, 1), 0).unwrap_err();
    assert!(matches!(err, SamplerError::EnergyMismatch { index: 0, .. }), "{err}");
}

#[test]
fn stale_responses_are_skipped() {
    let addr = scripted(|req| {
        let stale = Response::Samples {
            id: "stale".into(),
            samples: vec![WireSample { bits: vec![], energy: 0.0, count: 1 }],
        };
        let q = Qubo::<f64>::from_wire(&req.qubo).unwrap();
        vec![
            serde_json::to_string(&stale).unwrap(),
            serde_json::to_string(&Response::from_set(req.id, &sample_exact(&q).unwrap())).unwrap(),
        ]
    });
    let remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    let q = tsp(3, 3);
    assert_eq!(remote.sample(&q, 0).unwrap(), sample_exact(&q).unwrap());
}

#[test]
fn backend_errors_surface() {
    let addr = scripted(|req| {
        vec![serde_json::to_string(&Response::Error { id: Some(req.id), error: "no device".into() }).unwrap()]
    });
    let remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    let err = <RemoteSampler as Sampler<f64>>::sample(&remote, &tsp(3, 1), 0).unwrap_err();
    assert!(matches!(&err, SamplerError::Backend(m) if m == "no device"));
    assert!(err.is_remote());
}

#[test]
fn silent_server_times_out() {
    let addr = scripted(|_| vec![]);
    let mut remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    remote.timeout = Duration::from_millis(200);
    let err = <RemoteSampler as Sampler<f64>>::sample(&remote, &tsp(3, 1), 0).unwrap_err();
    assert!(matches!(err, SamplerError::Timeout(_)));
}

#[test]
fn refused_connection_is_a_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let remote = RemoteSampler::new(RemoteEndpoint::Tcp(format!("127.0.0.1:{port}")));
    assert!(matches!(remote.connect(), Err(SamplerError::Transport(_))));
}

#[test]
fn bridged_annealer_matches_in_process_distribution() {
    let addr = loopback(|q, reads| sample_sa(q, &AnnealSchedule::for_qubo(q, reads, 5)));
    let mut remote = RemoteSampler::new(RemoteEndpoint::Tcp(addr));
    remote.num_reads = 50;
    let local = AnnealingSampler { num_reads: 50 };
    let q = tsp(4, 33);
    let ground = best_sample(&sample_exact(&q).unwrap()).unwrap().1;
    let mut hits = (0, 0);
    for seed in 0..20 {
        let r: SampleSet = remote.sample(&q, seed).unwrap();
        let l: SampleSet = local.sample(&q, seed).unwrap();
        hits.0 += ((best_sample(&r).unwrap().1 - ground).abs() < 1e-9) as usize;
        hits.1 += ((best_sample(&l).unwrap().1 - ground).abs() < 1e-9) as usize;
    }
    assert!(hits.0.abs_diff(hits.1) <= 4, "{hits:?}");
}
