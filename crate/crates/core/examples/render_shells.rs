// Renders one scene as a contour-shell image at two shell thicknesses and
// writes the pair as NIfTI.
//
// $ cargo run --release --example render_shells -- /tmp/render

use std::path::PathBuf;

use anatomy_forge::nifti::{write_nifti, Datatype};
use anatomy_forge::relation::{load_graph, DEFAULT_GRAPH};
use anatomy_forge::rng::{render_rng, scene_rng};
use anatomy_forge::shape_bank::BankOptions;
use anatomy_forge::{
    build_bank, fit_anchors, phantom, render_image, render_labels, synthesize_scene, RenderParams, SynthesisConfig,
};

fn main() -> anatomy_forge::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render".into()));
    std::fs::create_dir_all(&out)?;
    let subjects = phantom::corpus(5, [96, 96, 96], 0);
    let bank = build_bank(&subjects, &phantom::raw_labels(), BankOptions::default())?;
    let anchors = fit_anchors(&subjects, bank.class_map())?;
    let graph = load_graph(DEFAULT_GRAPH, 32)?;
    let cfg = SynthesisConfig { dims: [96, 96, 96], ..Default::default() };
    let scene = synthesize_scene(&bank, &anchors, &graph, &cfg, &mut scene_rng(0, 0))?;

    let labels = render_labels(&scene);
    let filled = labels.data().iter().filter(|&&v| v > 0).count();
    write_nifti(&labels, &out.join("labels.nii.gz"), Datatype::Uint8)?;
    println!("labels: {filled} foreground voxels");

    for thickness in [1, 2] {
        let params = RenderParams { shell_thickness: thickness, noise_sigma: 0.0, ..Default::default() };
        let img = render_image(&scene, &params, &mut render_rng(0, 0));
        let shell = img.data().iter().filter(|&&v| v > 0.0).count();
        println!("shell thickness {thickness}: {shell} bright voxels ({:.1}% of foreground)", 100.0 * shell as f64 / filled as f64);
        write_nifti(&img, &out.join(format!("shell_{thickness}.nii.gz")), Datatype::Float32)?;
    }
    Ok(())
}
