use fadechan::aperture::ApertureGeometry;
use fadechan::numerics::{AngleMode, RngStream};
use fadechan::pdt::*;
use fadechan::turbulence::*;

fn main() {
    let geom = ApertureGeometry::new(0.075, 0.023, 0.0).unwrap();
    let budget = QmcBudget { n_10d: 20_000_000, ..Default::default() };
    let mut means = vec![];
    for km in [1.0, 2.0, 3.0] {
        let p = ChannelParams::new(800e-9, 0.02, 1e-14, 1000.0 * km).unwrap();
        let rng = RngStream::new(7, 0);
        let t0 = std::time::Instant::now();
        let st = compute_field_statistics(&p, &geom, &budget, &rng).unwrap();
        println!("--- L = {km} km  (stats in {:.1}s)  sigma_R2 = {:.3}", t0.elapsed().as_secs_f64(), p.rytov_variance());
        println!("eta = [{:.5}+-{:.1e}, {:.5}+-{:.1e}]  corr = [{:.4}+-{:.1e}, {:.4}+-{:.1e}, {:.4}+-{:.1e}]",
            st.mean_eta[0].value, st.mean_eta[0].std_err, st.mean_eta[1].value, st.mean_eta[1].std_err,
            st.eta_corr[0][0].value, st.eta_corr[0][0].std_err,
            st.eta_corr[0][1].value, st.eta_corr[0][1].std_err,
            st.eta_corr[1][1].value, st.eta_corr[1][1].std_err);
        println!("W_ST = {:.4}  sigma_bw = {:.4}  theta: mean {:.3} var {:.3e} cov {:.3e}",
            st.w_st.value, st.sigma_bw2.value.sqrt(), st.theta_mean.value, st.theta_var.value, st.theta_cov.value);
        println!("flags: {:?}", st.flags);

        // weak-BW pipeline
        let corr = CorrectionSettings::none();
        match weak_bw_params(&st, &geom, &corr) {
            Ok(wp) => {
                println!("weak-BW: eta0 = [{:.4}, {:.4}] F = {:.4} warnings {:?}", wp.eta0[0], wp.eta0[1], wp.truncation_mass, wp.warnings);
                match pdt_weak_bw(&wp, &corr, 500_000, 200, &RngStream::new(8, 0)) {
                    Ok(d) => {
                        let want = st.mean_eta[0].value - st.mean_eta[1].value;
                        println!("weak-BW PDT mean = {:.5} vs <eta1>-<eta2> = {:.5} ({:+.2}%)  rej: trunc {} order {}",
                            d.mean, want, 100.0*(d.mean/want - 1.0),
                            d.diagnostics.rejected_truncation, d.diagnostics.rejected_ordering);
                        means.push((km, d.mean));
                    }
                    Err(e) => println!("weak-BW PDT error: {e}"),
                }
            }
            Err(e) => println!("weak_bw_params error: {e}"),
        }
        // elliptic at 1km for offset scan sanity
        if km == 1.0 {
            let run = |d0: f64| {
                let c = CorrectionSettings::new(d0, 1.0, 1.0).unwrap();
                pdt_elliptic(&st, p.w0, &geom, &c, AngleMode::Uniform, 200_000, 200, &RngStream::new(9, 0))
            };
            let grid: Vec<f64> = (0..15).map(|i| 0.098 * i as f64 / 14.0).collect();
            let scan = scan_offset(&grid, run).unwrap();
            let best = scan.iter().max_by(|a, b| a.mean_eta.partial_cmp(&b.mean_eta).unwrap()).unwrap();
            println!("offset scan argmax d0 = {:.4} (want ~0.049), mean {:.4}; d0=0 mean {:.4}", best.d0, best.mean_eta, scan[0].mean_eta);
        }
    }
    println!("\nlength ordering: {:?}", means);
}
