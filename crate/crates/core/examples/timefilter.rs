use flsim_core::flguard::{self, FLGuardHyper};
use flsim_core::linalg::Matrix;
use flsim_core::rng::{stream_rng, Stream};
use rand::Rng;
use std::time::Instant;

fn main() {
    let n = 20;
    let d = 3072;
    let mut rng = stream_rng(1010, Stream::Contrastive, 0, 0);
    let rows: Vec<Vec<f64>> = (0..100)
        .map(|_| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let window = Matrix::from_rows(&rows).unwrap();
    let hyper = FLGuardHyper { epochs: 1, ..Default::default() };
    let (assets, _) = flguard::train_contrastive(&window, &hyper, 9, 5).unwrap();

    let g_rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let g = Matrix::from_rows(&g_rows).unwrap();

    let _ = flguard::filter_clients(&g, &assets).unwrap();
    let t = Instant::now();
    let sel = assets.selector_lv.apply(&g).unwrap();
    println!("selector.apply: {:?}", t.elapsed());
    let t = Instant::now();
    let scaled = assets.scaler.lv.apply(&sel).unwrap();
    println!("scaler.apply: {:?}", t.elapsed());
    let t = Instant::now();
    let h = assets.model_lv.encode(&scaled).unwrap();
    println!("encode forward: {:?}", t.elapsed());
    let t = Instant::now();
    let proj = flguard::pca2(&h).unwrap();
    println!("pca2: {:?}", t.elapsed());
    let t = Instant::now();
    let (a, b) = flguard::ahc_two_clusters(&proj).unwrap();
    println!("ahc: {:?}", t.elapsed());
    let _ = (a, b);
    let t = Instant::now();
    let out = flguard::filter_clients(&g, &assets).unwrap();
    println!("full filter_clients: {:?} (selected {})", t.elapsed(), out.selected.len());
}
