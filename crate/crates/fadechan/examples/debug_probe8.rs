use fadechan::aperture::ApertureGeometry;
use fadechan::numerics::RngStream;
use fadechan::pdt::*;
use fadechan::turbulence::*;

fn main() {
    let geom = ApertureGeometry::new(0.075, 0.023, 0.0).unwrap();
    let budget = QmcBudget { n_10d: 20_000_000, ..Default::default() };
    let p = ChannelParams::new(800e-9, 0.02, 1e-14, 3000.0).unwrap();
    let st = compute_field_statistics(&p, &geom, &budget, &RngStream::new(7, 0)).unwrap();
    let corr = CorrectionSettings::none();
    let wp = weak_bw_params(&st, &geom, &corr).unwrap();
    // evaluate the analytic accepted-moment model at the PRINTED parameters
    let m0 = [-wp.mu_offset[0], -wp.mu_offset[1]];
    let s = wp.cov_lognormal;
    let m = debug_weak_bw_moments(m0, &s, wp.scale_r, wp.shape_lambda, wp.d0, wp.delta);
    println!("analytic accepted moments at printed params: {m:?}");
    // MC truth with the same params (cov_cal == printed here since calibration failed)
    let d = pdt_weak_bw(&wp, &corr, 2_000_000, 200, &RngStream::new(8, 0)).unwrap();
    println!("MC: mean {:.5} second {:.5}", d.mean, d.second_moment);
    println!("targets: eta = [{:.5},{:.5}] corr = [{:.5},{:.5},{:.5}]",
        st.mean_eta[0].value, st.mean_eta[1].value,
        st.eta_corr[0][0].value, st.eta_corr[1][1].value, st.eta_corr[0][1].value);
}
