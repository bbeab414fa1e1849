//! Prints the noisy-prediction trends: ANCSH vs NPCS per part, NAOCS
//! translation under G noise, and the occlusion rank correlation.

use articulate_core::canonical::CanonicalModel;
use articulate_core::evaluate::{run_baseline, spearman, DEFAULT_AD_FRACTION};
use articulate_core::kinematics::{make_procedural_model, Category, ShapeParams};
use articulate_core::observe::{generate_scenes, CameraConfig};
use articulate_core::pipeline::{FitConfig, Method};
use articulate_core::predict::NoiseConfig;

fn main() -> anyhow::Result<()> {
    let category: Category = std::env::args().nth(1).unwrap_or("eyeglasses_like".into()).parse()?;
    let count: usize = std::env::args().nth(2).map_or(Ok(100), |s| s.parse())?;
    let model = make_procedural_model(category, 0, &ShapeParams::default())?;
    let canonical = CanonicalModel::build(&model, 0.2)?;
    let scenes = generate_scenes(&model, &canonical, &CameraConfig::default(), 7, count, "m.json")?;
    let noise = NoiseConfig {
        npcs_sigma: 0.02,
        seg_flip_prob: 0.05,
        ..Default::default()
    };
    let fit = FitConfig::default();
    let npcs = run_baseline(
        Method::Npcs,
        &model,
        &canonical,
        &scenes,
        &noise,
        &fit,
        7,
        Some(DEFAULT_AD_FRACTION),
    );
    let ancsh = run_baseline(
        Method::Ancsh,
        &model,
        &canonical,
        &scenes,
        &noise,
        &fit,
        7,
        Some(DEFAULT_AD_FRACTION),
    );
    for j in 0..model.part_count() {
        let (mut wins, mut losses) = (0, 0);
        for (a, b) in ancsh.scenes.iter().zip(&npcs.scenes) {
            let (x, y) = (a.parts[j].rotation_error_deg, b.parts[j].rotation_error_deg);
            if x < y {
                wins += 1;
            } else if x > y {
                losses += 1;
            }
        }
        println!(
            "part {j}: npcs {:.3} ancsh {:.3} deg, wins {wins} losses {losses}; iou {:.3} / {:.3}",
            npcs.parts[j].rotation_error_deg,
            ancsh.parts[j].rotation_error_deg,
            npcs.parts[j].iou_3d.unwrap_or(f64::NAN),
            ancsh.parts[j].iou_3d.unwrap_or(f64::NAN)
        );
    }
    for (k, (a, b)) in ancsh.joints.iter().zip(&npcs.joints).enumerate() {
        println!(
            "joint {k}: axis npcs {:.3} ancsh {:.3}, state {:.3}/{:.3}",
            b.axis_error_deg, a.axis_error_deg, b.state_error, a.state_error
        );
    }
    let vis: Vec<f64> = ancsh
        .scenes
        .iter()
        .flat_map(|m| m.parts.iter().map(|p| p.visibility))
        .collect();
    let rot: Vec<f64> = ancsh
        .scenes
        .iter()
        .flat_map(|m| m.parts.iter().map(|p| p.rotation_error_deg))
        .collect();
    println!("spearman(visibility, rotation error) = {:?}", spearman(&vis, &rot));

    let gnoise = NoiseConfig {
        npcs_sigma: 0.01,
        g_scale_rel_sigma: 0.05,
        g_offset_sigma: 0.02,
        ..Default::default()
    };
    let n2 = run_baseline(
        Method::Npcs,
        &model,
        &canonical,
        &scenes,
        &gnoise,
        &fit,
        7,
        Some(DEFAULT_AD_FRACTION),
    );
    let a2 = run_baseline(
        Method::Naocs,
        &model,
        &canonical,
        &scenes,
        &gnoise,
        &fit,
        7,
        Some(DEFAULT_AD_FRACTION),
    );
    for j in 0..model.part_count() {
        println!(
            "G noise part {j}: translation npcs {:.4} naocs {:.4}; rotation {:.3} / {:.3}",
            n2.parts[j].translation_error,
            a2.parts[j].translation_error,
            n2.parts[j].rotation_error_deg,
            a2.parts[j].rotation_error_deg
        );
    }
    Ok(())
}
