use fadechan::aperture::ApertureGeometry;
use fadechan::numerics::RngStream;
use fadechan::pdt::*;
use fadechan::turbulence::*;

fn main() {
    let geom = ApertureGeometry::new(0.075, 0.023, 0.0).unwrap();
    let budget = QmcBudget { n_10d: 20_000_000, ..Default::default() };
    for km in [2.0, 3.0] {
        let p = ChannelParams::new(800e-9, 0.02, 1e-14, 1000.0 * km).unwrap();
        let st = compute_field_statistics(&p, &geom, &budget, &RngStream::new(7, 0)).unwrap();
        let corr = CorrectionSettings::none();
        let t0 = std::time::Instant::now();
        let wp = weak_bw_params(&st, &geom, &corr).unwrap();
        println!("--- {km} km: calibration {} in {:.2}s, warnings {:?}", wp.calibrated, t0.elapsed().as_secs_f64(), wp.warnings);
        let d = pdt_weak_bw(&wp, &corr, 1_000_000, 200, &RngStream::new(8, 0)).unwrap();
        let want_mean = st.mean_eta[0].value - st.mean_eta[1].value;
        let want_var = (st.eta_corr[0][0].value + st.eta_corr[1][1].value - 2.0*st.eta_corr[0][1].value) - want_mean*want_mean;
        println!("mean {:.5} vs {:.5} ({:+.2}%)   var {:.5e} vs {:.5e} ({:+.2}%)",
            d.mean, want_mean, 100.0*(d.mean/want_mean - 1.0),
            d.variance, want_var, 100.0*(d.variance/want_var - 1.0));
        println!("rejections: trunc {} order {} of {}", d.diagnostics.rejected_truncation, d.diagnostics.rejected_ordering, d.diagnostics.attempts);
    }
}
