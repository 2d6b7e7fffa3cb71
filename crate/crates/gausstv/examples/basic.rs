//! Minimal library usage: estimate the TV distance between two Gaussians
//! and compare against the quadrature reference.

use gausstv::gaussian::GaussianParams;
use gausstv::oracle::quadrature_tv_1d_pair;
use gausstv::pipeline::mult_gaussian_tv;

fn main() -> gausstv::Result<()> {
    let p1 = GaussianParams::from_raw(vec![1.0, 0.0], vec![vec![2.0, 0.3], vec![0.3, 1.0]])?;
    let p2 = GaussianParams::from_raw(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let result = mult_gaussian_tv(&p1, &p2, 0.05)?;
    println!("2-D estimate: {:.6} (eps = {})", result.estimate, result.eps);

    let one_dim = mult_gaussian_tv(
        &GaussianParams::from_raw(vec![0.5], vec![vec![1.5]])?,
        &GaussianParams::from_raw(vec![0.0], vec![vec![1.0]])?,
        0.01,
    )?;
    let reference = quadrature_tv_1d_pair(0.5, 1.5, 0.0, 1.0, 1e-10)?;
    println!(
        "1-D estimate: {:.8} vs quadrature {:.8} (rel gap {:.2e})",
        one_dim.estimate,
        reference,
        (one_dim.estimate - reference).abs() / reference
    );
    Ok(())
}
