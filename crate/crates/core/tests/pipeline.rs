use bimorph_core::chain::{ChainDesign, ARM_DOF};
use bimorph_core::data::{cluster_resample, extract_local_variation, synthesize_task, GeneratorSettings};
use bimorph_core::design::{anneal, design_cost, DesignFile, DEFAULT_CENTER_DISTANCE};
use bimorph_core::dexterity::{evaluate_cloud, jointly_normalized};
use bimorph_core::motion::{simulate_transition, transition_fixture};
use bimorph_core::se3::{canonical_screw, exp_twist, log_pose};
use bimorph_core::{AnnealSettings, CostSettings, DesignVector, PoseCloud, TaskLabel, TransitionSettings, Twist};
use nalgebra::Vector3;
use proptest::prelude::*;
use rand::SeedableRng;

fn small_cloud(label: TaskLabel, seed: u64) -> PoseCloud {
    let g = GeneratorSettings {
        duration: 6.0,
        ..Default::default()
    };
    let traj = synthesize_task(label, &g, seed).unwrap();
    cluster_resample(&extract_local_variation(&traj, 2.0).unwrap(), 0.005, 80, seed).unwrap()
}

#[test]
fn recording_to_design_to_transition() {
    let cloud = small_cloud(TaskLabel::Cutting, 4);
    assert_eq!(cloud.len(), 80);
    let settings = AnnealSettings {
        max_iters: 30,
        rng_seed: 2,
        ..Default::default()
    };
    let start = DesignVector::anthropomorphic();
    let (best, trace) = anneal(&start, &cloud, &settings).unwrap();
    assert_eq!(trace.steps.len(), 30);
    let c = design_cost(&best, &cloud, &settings.cost);
    assert!(c <= trace.initial_cost);
    assert!((c - trace.best_cost()).abs() <= 1e-12 * c.max(1.0));

    let tool = settings.cost.tool_offset();
    let sys = best.to_system(tool, DEFAULT_CENTER_DISTANCE, ChainDesign::default_positioner());
    let back = DesignFile::from_system(&sys, Some(c)).to_system(ChainDesign::default_positioner()).unwrap();
    for (a, b) in sys.arm.joints.iter().zip(&back.arm.joints) {
        assert!((a.axis - b.axis).norm() < 1e-12 && (a.point - b.point).norm() < 1e-12);
    }

    let ts = TransitionSettings {
        duration: 0.5,
        ..Default::default()
    };
    let (w1, w2) = transition_fixture(&sys, &ts, Vector3::new(0.05, 0.0, 0.0)).unwrap();
    let run = simulate_transition(&sys, sys.arm.wrist_point(), &w1, &w2, true, &ts).unwrap();
    assert!(run.tracking_error() <= 1e-9);
    assert_eq!(run.steps.len(), 51);
}

#[test]
fn joint_normalization_is_shared_across_designs() {
    let cloud = small_cloud(TaskLabel::Suturing, 6);
    let cost = CostSettings::default();
    let tool = cost.tool_offset();
    let a = evaluate_cloud(&DesignVector::anthropomorphic().arm_chain(tool), &cloud, &cost).unwrap();
    let b = evaluate_cloud(
        &DesignVector::random_feasible(&mut rand_chacha::ChaCha8Rng::seed_from_u64(5), Vector3::zeros()).arm_chain(tool),
        &cloud,
        &cost,
    )
    .unwrap();
    let reports = jointly_normalized(vec![a, b]);
    assert_eq!(reports[0].bounds, reports[1].bounds);
    for r in &reports {
        assert_eq!(r.points.len(), cloud.len());
        assert!(r.composite.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

proptest! {
    #[test]
    fn exp_log_round_trip(
        w in prop::array::uniform3(-1.0f64..1.0),
        v in prop::array::uniform3(-1.0f64..1.0),
        theta in 0.01f64..3.0,
    ) {
        let w = Vector3::from(w);
        prop_assume!(w.norm() > 0.1);
        let xi = Twist::new(w.normalize(), Vector3::from(v));
        let (back, th) = log_pose(&exp_twist(&xi, theta)).unwrap();
        let (a, ta) = canonical_screw(&xi, theta);
        let (b, tb) = canonical_screw(&back, th);
        prop_assert!((a.to_vector() - b.to_vector()).norm() < 1e-9);
        prop_assert!((ta - tb).abs() < 1e-9);
    }

    #[test]
    fn design_vector_round_trip(seed in 0u64..1000) {
        let d = DesignVector::random_feasible(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed), Vector3::zeros());
        prop_assert!(d.validate().is_ok());
        let back = DesignVector::from_slice(&d.to_vec()).unwrap();
        for j in 0..ARM_DOF {
            prop_assert!((back.axis(j) - d.axis(j)).norm() < 1e-12);
        }
    }
}
