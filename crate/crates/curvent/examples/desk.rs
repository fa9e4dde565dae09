//! Desk-scale tour: build a block-dynamics family on the binary cube,
//! certify its contraction constant exactly, then bracket it from
//! above with the ascent estimator and the spectral bound.

use curvent::{
    build_gff, build_product, certify_kappa, contraction_check, coupled_paths, decay_rate_fit,
    estimate_rho, glauber_constants, AscentConfig, BlockFamily, CertReportJson, PairMode,
    Quadratic, Rat,
};

fn main() -> curvent::Result<()> {
    let family: BlockFamily<Rat> = BlockFamily::site_pairs(3)?;
    let exact = build_product(&[2, 2, 2], &family)?;
    let cert = certify_kappa(
        &exact.space,
        &exact.kernels,
        &exact.theta,
        &exact.metric,
        PairMode::Exhaustive,
    )?;
    println!("certified kappa          = {}", cert.kappa);
    println!("coverage floor theta*    = {}", family.theta_star());

    let wire = serde_json::to_string(&CertReportJson::from_report(&cert, &exact.space))
        .map_err(|e| curvent::Error::usage(e.to_string()))?;
    let back: CertReportJson =
        serde_json::from_str(&wire).map_err(|e| curvent::Error::usage(e.to_string()))?;
    println!(
        "cert json kappa_exact    = {}",
        back.kappa_exact.as_deref().unwrap_or("-")
    );

    let float = exact.to_f64();
    let est = estimate_rho(&float.space, &float.kernels, &float.theta, &AscentConfig::default())?;
    println!("ascent upper complement  = {:.12}", est.rho_est);
    println!("spectral variance factor = {:.12}", est.spectral_factor);

    let gff = build_gff(&[
        vec![0.0, 0.5, 0.0],
        vec![0.5, 0.0, 0.5],
        vec![0.0, 0.5, 0.0],
    ])?;
    let g = glauber_constants(&gff);
    println!("gff glauber kappa        = {:.12}", g.kappa);

    let pairs: BlockFamily<f64> = BlockFamily::site_pairs(4)?;
    let sweep = contraction_check(&pairs, 2.0, 2_000, 7)?;
    println!(
        "sphere worst ratio       = {:.12} (ceiling {:.12})",
        sweep.max_ratio, sweep.bound
    );

    let run = coupled_paths(&Quadratic { rho: 1.0 }, &[1.0, 0.5], &[-0.5, 0.0], 1e-3, 5.0, 9)?;
    println!(
        "langevin fitted rate     = {:.6}",
        decay_rate_fit(&run.times, &run.distances)?
    );
    Ok(())
}
