use articulate_core::canonical::CanonicalModel;
use articulate_core::kinematics::{make_procedural_model, Category, ShapeParams};
use articulate_core::observe::{generate_scenes, CameraConfig};

fn main() {
    for cat in Category::ALL {
        let m = make_procedural_model(cat, 1, &ShapeParams::default()).unwrap();
        let c = CanonicalModel::build(&m, 0.2).unwrap();
        let scenes = generate_scenes(&m, &c, &CameraConfig::default(), 1, 50, "m").unwrap();
        let mut occ = vec![0.0; m.part_count()];
        let mut cnt = vec![0usize; m.part_count()];
        let mut under = 0;
        for s in &scenes {
            for j in 0..m.part_count() {
                occ[j] += s.occlusion[j] / scenes.len() as f64;
                cnt[j] += s.point_indices_of(j).count();
            }
            under += s.undersampled as usize;
        }
        let assoc: usize = scenes
            .iter()
            .map(|s| s.gt_assoc.iter().filter(|&&a| a > 0).count())
            .sum();
        println!(
            "{cat}: occ {occ:.2?} pts/scene {:?} undersampled {under} assoc/scene {}",
            cnt.iter().map(|c| c / scenes.len()).collect::<Vec<_>>(),
            assoc / scenes.len()
        );
    }
}
