use vline_core::eval::rel_l2;
use vline_core::io::{read_vector_field, write_vector_field};
use vline_core::phantom::{gradient_field, perp_gradient_field, Bump};
use vline_core::recon::{recover_from_lvt_tvt, run_pipeline};
use vline_core::vlt::{lvt, tvt};
use vline_core::{Direction, Grid2D, NoiseSpec, Pipeline, PipelineConfig, VLineGeometry, VectorField};

fn mixed_field(n: usize) -> VectorField {
    let g = Grid2D::unit(n).unwrap();
    let a = Bump::new([0.1, -0.05], 0.35);
    let b = Bump::new([-0.1, 0.1], 0.3);
    gradient_field(&a, &g).lincomb(1.0, &perp_gradient_field(&b, &g), 0.5).unwrap()
}

fn worst(recon: &VectorField, truth: &VectorField) -> f64 {
    let e1 = rel_l2(&recon.f1, &truth.f1, 0.8).unwrap().value;
    let e2 = rel_l2(&recon.f2, &truth.f2, 0.8).unwrap().value;
    e1.max(e2)
}

#[test]
fn lvt_tvt_inversion_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("f.vlf");
    let f = mixed_field(96);
    write_vector_field(&path, &f).unwrap();
    let f = read_vector_field(&path).unwrap();

    // a non-default opening angle works as well
    let g = VLineGeometry::new(Direction::from_degrees(20.0), Direction::from_degrees(140.0)).unwrap();
    let recon = recover_from_lvt_tvt(&lvt(&f, &g), &tvt(&f, &g), &g).unwrap();
    assert!(worst(&recon, &f) < 0.08, "{}", worst(&recon, &f));
}

#[test]
fn every_pipeline_recovers_a_smooth_field() {
    let f = mixed_field(64);
    for p in Pipeline::ALL {
        let run = run_pipeline(&f, &PipelineConfig::new(p)).unwrap();
        assert_eq!(run.recon.grid(), f.grid());
        let e = worst(&run.recon, &run.truth);
        assert!(e < 0.25, "pipeline {}: {e}", p.id());
    }
}

#[test]
fn noisy_runs_are_reproducible() {
    let f = mixed_field(48);
    let mut cfg = PipelineConfig::new(Pipeline::LvtTvt);
    cfg.noise = NoiseSpec::new(0.1, 5).unwrap();
    let a = run_pipeline(&f, &cfg).unwrap();
    let b = run_pipeline(&f, &cfg).unwrap();
    assert_eq!(a.recon, b.recon);
    cfg.noise.seed = 6;
    assert_ne!(run_pipeline(&f, &cfg).unwrap().recon, a.recon);
}
