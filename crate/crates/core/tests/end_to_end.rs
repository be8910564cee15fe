use recon_core::blind::{blind_reconcile, BlindConfig};
use recon_core::cascade::{cascade_reconcile, CascadeConfig};
use recon_core::ldpc::{format_alist, parse_alist, CodeSet, CodeSetSpec};
use recon_core::metrics::qber;
use recon_core::postproc::{verify_cluster, PolyHash, VerificationParams};
use recon_core::session::replay_leak;
use recon_core::{transmit_bsc, BitFrame, ChannelParams, LatencyModel, Session};

fn pair(n: usize, q: f64, i: u64) -> (BitFrame, BitFrame) {
    let x = BitFrame::random(n, 77, i);
    let y = transmit_bsc(&x, &ChannelParams::new(q, 78).unwrap());
    (x, y)
}

fn small_set() -> CodeSet {
    CodeSetSpec {
        frame_size: 4000,
        count: 5,
        q_min: 0.02,
        q_max: 0.08,
        ..CodeSetSpec::default()
    }
    .generate()
    .unwrap()
}

#[test]
fn cascade_over_tcp_matches_in_memory() {
    let (x, y) = pair(8192, 0.03, 0);
    let cfg = CascadeConfig::default();
    let (_m, a, b) = Session::open(LatencyModel::default());
    let (mem, out_mem) = cascade_reconcile(&a, &b, &x, &y, 0.03, 0.03, &cfg).unwrap();
    let (s, a, b) = Session::open_tcp(LatencyModel::default()).unwrap();
    let (tcp, out_tcp) = cascade_reconcile(&a, &b, &x, &y, 0.03, 0.03, &cfg).unwrap();
    assert_eq!(out_mem, out_tcp);
    assert_eq!((mem.leak_ir, mem.messages), (tcp.leak_ir, tcp.messages));
    assert_eq!(replay_leak(&s.transcript()), tcp.leak_ir);
}

#[test]
fn blind_then_verification() {
    let set = small_set();
    let params = VerificationParams::default();
    for i in 0..4 {
        let (x, y) = pair(set.key_len(), 0.04, i);
        let (s, a, b) = Session::open(LatencyModel::from_millis(1.0).unwrap());
        let (r, out) = blind_reconcile(&a, &b, &x, &y, 0.04, 0.04, &set, &BlindConfig::default()).unwrap();
        let hash = PolyHash::seeded(params.t, 5, i).unwrap();
        let v = verify_cluster(&a, &b, &[x.clone()], &[out.clone()], &params, &hash).unwrap();
        assert_eq!(v.pass, r.success);
        assert_eq!(v.leak_ev, u64::from(params.t));
        let d = set.modulated_count() as u64;
        assert_eq!(replay_leak(&s.transcript()), r.leak_ir + d + v.leak_ev);
        assert!(s.clock() >= 1e-3 * r.rounds as f64);
    }
}

#[test]
fn verification_catches_a_residual_error() {
    let params = VerificationParams::default();
    let (x, _) = pair(4000, 0.0, 9);
    let mut wrong = x.clone();
    wrong.flip(1234);
    let frames = vec![x.clone(), x.clone(), x];
    let mut bob = frames.clone();
    bob[1] = wrong;
    let (_s, a, b) = Session::open(LatencyModel::default());
    let hash = PolyHash::seeded(params.t, 1, 0).unwrap();
    let v = verify_cluster(&a, &b, &frames, &bob, &params, &hash).unwrap();
    assert!(!v.pass);
}

#[test]
fn code_set_survives_alist_round_trip() {
    let set = small_set();
    let dir = tempfile::tempdir().unwrap();
    set.save(dir.path(), None).unwrap();
    let back = CodeSet::load(dir.path()).unwrap();
    assert_eq!(back, set);
    for c in set.codes() {
        let text = format_alist(&c.matrix);
        assert_eq!(parse_alist(&text).unwrap(), *c.matrix);
    }
}

#[test]
fn measured_qber_tracks_channel() {
    let (x, y) = pair(200_000, 0.05, 3);
    let q = qber(&x, &y).unwrap();
    // 4 sd of a binomial proportion
    assert!((q - 0.05).abs() < 4.0 * (0.05f64 * 0.95 / 200_000.0).sqrt(), "{q}");
}
