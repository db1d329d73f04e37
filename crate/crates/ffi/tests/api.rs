use std::ffi::{CStr, CString};
use std::ptr;

use pooldrop_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(pd_last_error()) }.to_string_lossy().into_owned()
}

fn new_net(arch: &str, opts: &PdNetworkOptions) -> (PdStatus, *mut PdNetwork) {
    let arch = CString::new(arch).unwrap();
    let mut net = ptr::null_mut();
    let status = unsafe { pd_network_new(arch.as_ptr(), opts, &mut net) };
    (status, net)
}

#[test]
fn network_round_trip() {
    let opts = PdNetworkOptions {
        train_pooling: PdTrainPooling::MaxDropout,
        pool_retain: 0.5,
        seed: 3,
        ..pd_network_options_default()
    };
    let (status, net) = new_net("1x8x8-3C3-3P2-4C2-5N-4N", &opts);
    assert_eq!(status, PdStatus::Ok, "{}", last_error());
    unsafe {
        assert_eq!(pd_network_input_len(net), 64);
        assert_eq!(pd_network_class_count(net), 4);
        let n = pd_network_param_count(net);
        assert_eq!(n, 3 * 9 + 3 + 4 * 3 * 4 + 4 + 4 * 5 + 5 + 5 * 4 + 4);

        let x: Vec<f64> = (0..64).map(|i| (i % 7) as f64 / 7.0).collect();
        let mut logits = [0.0; 4];
        assert_eq!(
            pd_network_forward(net, x.as_ptr(), x.len(), PdTestPooling::ProbWeighted, logits.as_mut_ptr(), 4),
            PdStatus::Ok
        );
        let mut class = usize::MAX;
        assert_eq!(pd_network_predict(net, x.as_ptr(), 64, PdTestPooling::ProbWeighted, &mut class), PdStatus::Ok);
        let best = (0..4).fold(0, |b, i| if logits[i] > logits[b] { i } else { b });
        assert_eq!(class, best);

        let mut a = [0.0; 4];
        let mut b = [0.0; 4];
        pd_network_forward_train(net, x.as_ptr(), 64, 9, 0, a.as_mut_ptr(), 4);
        pd_network_forward_train(net, x.as_ptr(), 64, 9, 0, b.as_mut_ptr(), 4);
        assert_eq!(a, b);

        let mut params = vec![0.0; n];
        assert_eq!(pd_network_get_params(net, params.as_mut_ptr(), n), PdStatus::Ok);
        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("net.pdck").to_str().unwrap()).unwrap();
        assert_eq!(pd_network_save(net, path.as_ptr(), 5), PdStatus::Ok);
        let mut loaded = ptr::null_mut();
        assert_eq!(pd_network_load(path.as_ptr(), &opts, &mut loaded), PdStatus::Ok, "{}", last_error());
        let mut again = vec![0.0; n];
        pd_network_get_params(loaded, again.as_mut_ptr(), n);
        assert_eq!(params, again);
        let mut logits2 = [0.0; 4];
        pd_network_forward(loaded, x.as_ptr(), 64, PdTestPooling::ProbWeighted, logits2.as_mut_ptr(), 4);
        assert_eq!(logits, logits2);

        params.iter_mut().for_each(|v| *v = 0.0);
        assert_eq!(pd_network_set_params(loaded, params.as_ptr(), n), PdStatus::Ok);
        pd_network_forward(loaded, x.as_ptr(), 64, PdTestPooling::Max, logits2.as_mut_ptr(), 4);
        assert_eq!(logits2, [0.0; 4]);
        pd_network_free(loaded);
        pd_network_free(net);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let (status, net) = new_net("1x8x8-3C3-3Q2-4N", &pd_network_options_default());
    assert_eq!(status, PdStatus::Arch);
    assert!(net.is_null());
    assert!(last_error().contains("position 11"), "{}", last_error());

    let (status, net) = new_net("1x8x8-3C3-4N", &pd_network_options_default());
    assert_eq!(status, PdStatus::Ok);
    unsafe {
        let x = [0.0; 10];
        let mut logits = [0.0; 4];
        assert_eq!(
            pd_network_forward(net, x.as_ptr(), 10, PdTestPooling::Max, logits.as_mut_ptr(), 4),
            PdStatus::ShapeMismatch
        );
        let x = [0.0; 64];
        let mut small = [0.0; 2];
        assert_eq!(
            pd_network_forward(net, x.as_ptr(), 64, PdTestPooling::Max, small.as_mut_ptr(), 2),
            PdStatus::BufferTooSmall
        );
        assert_eq!(
            pd_network_forward(ptr::null(), x.as_ptr(), 64, PdTestPooling::Max, logits.as_mut_ptr(), 4),
            PdStatus::NullPointer
        );
        assert_eq!(last_error(), "net is null");
        assert_eq!(pd_network_param_count(ptr::null()), 0);
        pd_network_free(net);
        pd_network_free(ptr::null_mut());

        let missing = CString::new("/nonexistent/net.pdck").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(pd_network_load(missing.as_ptr(), &pd_network_options_default(), &mut out), PdStatus::Io);
    }
}

#[test]
fn region_functions() {
    unsafe {
        let acts = [3.0, 1.0, 2.0];
        let p = 0.5;
        let mut v = 0.0;
        assert_eq!(pd_prob_weighted_value(acts.as_ptr(), 3, p, &mut v), PdStatus::Ok);
        // 3 with p, 2 with pq, 1 with pq^2
        assert!((v - (3.0 * 0.5 + 2.0 * 0.25 + 1.0 * 0.125)).abs() < 1e-15);

        let mut probs = [0.0; 4];
        assert_eq!(pd_region_probs_maxdrop(acts.as_ptr(), 3, p, probs.as_mut_ptr(), 4), PdStatus::Ok);
        assert_eq!(probs, [0.125, 0.5, 0.125, 0.25]);

        let region = [1.0, 6.0, 5.0, 3.0];
        let mut sp = [0.0; 4];
        let mut e = 0.0;
        assert_eq!(pd_region_stochastic(region.as_ptr(), 4, sp.as_mut_ptr(), 4, &mut e), PdStatus::Ok);
        assert_eq!(sp, [1.0 / 15.0, 6.0 / 15.0, 5.0 / 15.0, 3.0 / 15.0]);
        assert!((e - 71.0 / 15.0).abs() < 1e-12);

        let neg = [1.0, -1.0];
        assert_eq!(pd_prob_weighted_value(neg.as_ptr(), 2, p, &mut v), PdStatus::NegativeActivation);
        assert_eq!(pd_prob_weighted_value(acts.as_ptr(), 3, 1.5, &mut v), PdStatus::InvalidArgument);
        assert_eq!(pd_prob_weighted_value(acts.as_ptr(), 3, p, ptr::null_mut()), PdStatus::NullPointer);
    }
}

#[test]
fn counting_functions() {
    unsafe {
        let mut b = 0.0;
        assert_eq!(pd_base_b(4, PdCountFlavor::MaxPoolDropout, &mut b), PdStatus::Ok);
        assert!((b - 5f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(pd_base_b(4, PdCountFlavor::Stochastic, &mut b), PdStatus::Ok);
        assert!((b - 2f64.sqrt()).abs() < 1e-12);

        let mut r = 0.0;
        assert_eq!(pd_log_count_ratio(96, 1024, 4, &mut r), PdStatus::Ok);
        let want = 24576.0 * 1.25f64.ln();
        assert!(((r - want) / want).abs() < 1e-9);

        let mut c = 0.0;
        assert_eq!(pd_log_model_count(96, 1024, 4, PdCountFlavor::MaxPoolDropout, &mut c), PdStatus::Ok);
        assert!((c - 24576.0 * 5f64.ln()).abs() < 1e-6);
        assert_eq!(pd_log_model_count(3, 5, 4, PdCountFlavor::Stochastic, &mut c), PdStatus::InvalidArgument);
        assert!(last_error().contains("not divisible"));
    }
}
