use std::ffi::{c_char, CString};
use std::ptr;

use surf_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 256];
    let n = unsafe { surf_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf.iter().take(n.min(255)).map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn set(cfg: *mut SurfConfig, k: &str, v: &str) -> SurfStatus {
    let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
    unsafe { surf_config_set(cfg, k.as_ptr(), v.as_ptr()) }
}

fn tiny_config() -> *mut SurfConfig {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { surf_config_new(&mut cfg) }, SurfStatus::Ok);
    for (k, v) in [
        ("total_steps", "900"),
        ("feedback_frequency", "200"),
        ("max_budget", "10"),
        ("queries_per_session", "5"),
        ("reward.hidden", "16"),
        ("reward.layers", "2"),
        ("agent.hidden", "16"),
        ("agent.batch_size", "32"),
        ("agent.pretrain_steps", "300"),
        ("agent.seed_steps", "50"),
        ("crop.segment_len", "20"),
        ("crop.h_min", "15"),
        ("crop.h_max", "18"),
        ("ssl.batch_size", "8"),
        ("ssl.epochs", "2"),
        ("unlabeled_ratio", "3"),
        ("eval_episodes", "1"),
    ] {
        assert_eq!(set(cfg, k, v), SurfStatus::Ok, "{k}: {}", last_error());
    }
    cfg
}

#[test]
fn preference_probability_matches_logistic() {
    assert_eq!(surf_preference_prob(1.0, 1.0), 0.5);
    let p = surf_preference_prob(0.0, 2.0);
    assert!((p - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
}

#[test]
fn errors_are_reported_per_call() {
    let cfg = tiny_config();
    assert_eq!(set(cfg, "no_such_key", "1"), SurfStatus::Config);
    assert!(last_error().contains("no_such_key"));
    assert_eq!(set(cfg, "seed", "3"), SurfStatus::Ok);
    assert_eq!(unsafe { surf_last_error_message(ptr::null_mut(), 0) }, 0);
    assert_eq!(unsafe { surf_config_set(ptr::null_mut(), ptr::null(), ptr::null()) }, SurfStatus::NullPointer);
    assert_eq!(unsafe { surf_trainer_new(cfg, ptr::null_mut()) }, SurfStatus::NullPointer);
    let bad = CString::new("/nonexistent/surf.cfg").unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { surf_config_load(bad.as_ptr(), &mut out) }, SurfStatus::Io);
    assert!(out.is_null());
    unsafe {
        surf_config_free(cfg);
        surf_config_free(ptr::null_mut());
        surf_trainer_free(ptr::null_mut());
    }
}

#[test]
fn error_message_truncates() {
    let cfg = tiny_config();
    assert_eq!(set(cfg, "max_budget", "lots"), SurfStatus::Config);
    let mut small = [1 as c_char; 8];
    let full = unsafe { surf_last_error_message(small.as_mut_ptr(), small.len()) };
    assert!(full > 7);
    assert_eq!(small[7], 0);
    unsafe { surf_config_free(cfg) };
}

#[test]
fn invalid_schedule_is_a_config_error() {
    let cfg = tiny_config();
    assert_eq!(set(cfg, "max_budget", "100"), SurfStatus::Ok);
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { surf_trainer_new(cfg, &mut t) }, SurfStatus::Config);
    assert!(t.is_null());
    unsafe { surf_config_free(cfg) };
}

#[test]
fn train_save_and_reload() {
    let cfg = tiny_config();
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { surf_trainer_new(cfg, &mut t) }, SurfStatus::Ok);
    unsafe { surf_config_free(cfg) };

    let mut taken = 0;
    assert_eq!(unsafe { surf_trainer_advance(t, 100, &mut taken) }, SurfStatus::Ok);
    assert_eq!(taken, 100);
    assert_eq!(unsafe { surf_trainer_env_steps(t) }, 400);
    assert_eq!(unsafe { surf_trainer_labels_used(t) }, 5);

    let mut summary = SurfRunSummary::default();
    assert_eq!(unsafe { surf_trainer_run(t, &mut summary) }, SurfStatus::Ok);
    assert_eq!(summary.labels_used, 10);
    assert_eq!(summary.sessions, 3);
    assert!(summary.final_return.is_finite());
    assert!((0.0..=1.0).contains(&summary.heldout_accuracy));

    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("ck.bin").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { surf_trainer_save_checkpoint(t, path.as_ptr()) }, SurfStatus::Ok);
    unsafe { surf_trainer_free(t) };

    let mut policy = ptr::null_mut();
    assert_eq!(unsafe { surf_policy_load(path.as_ptr(), &mut policy) }, SurfStatus::Ok);
    assert_eq!(unsafe { surf_policy_action_dim(policy) }, 2);
    let state = [0.5, -0.5, 0.0, 0.0];
    let mut action = [f64::NAN; 2];
    assert_eq!(unsafe { surf_policy_act(policy, state.as_ptr(), 4, action.as_mut_ptr(), 2) }, SurfStatus::Ok);
    assert!(action.iter().all(|a| (-1.0..=1.0).contains(a)));
    let mut again = [0.0; 2];
    unsafe { surf_policy_act(policy, state.as_ptr(), 4, again.as_mut_ptr(), 2) };
    assert_eq!(action, again);
    assert_eq!(
        unsafe { surf_policy_act(policy, state.as_ptr(), 3, action.as_mut_ptr(), 2) },
        SurfStatus::Dimension
    );
    assert_eq!(
        unsafe { surf_policy_act(policy, state.as_ptr(), 4, action.as_mut_ptr(), 1) },
        SurfStatus::InvalidArgument
    );
    unsafe { surf_policy_free(policy) };

    let mut reward = ptr::null_mut();
    assert_eq!(unsafe { surf_reward_load(path.as_ptr(), &mut reward) }, SurfStatus::Ok);
    let mut r = f64::NAN;
    assert_eq!(
        unsafe { surf_reward_eval(reward, state.as_ptr(), 4, [0.1, 0.2].as_ptr(), 2, &mut r) },
        SurfStatus::Ok
    );
    assert!(r > -1.0 && r < 1.0);
    unsafe { surf_reward_free(reward) };
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/surf.h")).unwrap();
    for name in [
        "surf_last_error_message",
        "surf_preference_prob",
        "surf_config_new",
        "surf_config_load",
        "surf_config_set",
        "surf_config_free",
        "surf_trainer_new",
        "surf_trainer_pretrain",
        "surf_trainer_advance",
        "surf_trainer_run",
        "surf_trainer_env_steps",
        "surf_trainer_labels_used",
        "surf_trainer_save_checkpoint",
        "surf_trainer_free",
        "surf_reward_load",
        "surf_reward_eval",
        "surf_reward_free",
        "surf_policy_load",
        "surf_policy_action_dim",
        "surf_policy_act",
        "surf_policy_free",
        "typedef struct SurfTrainer SurfTrainer",
        "SURF_STATUS_NOT_FOUND = 7",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
