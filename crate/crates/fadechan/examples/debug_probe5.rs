use fadechan::aperture::ApertureGeometry;
use fadechan::numerics::RngStream;
use fadechan::turbulence::*;

fn main() {
    let geom = ApertureGeometry::new(0.075, 0.023, 0.0).unwrap();
    let budget = QmcBudget { n_4d: 40_000, n_10d: 8_000_000, replicates: 8, window_scale: 3.5 };
    for (tag, cn2) in [("vacuum", 0.0), ("1km-turb", 1e-14)] {
        let p = ChannelParams::new(800e-9, 0.02, cn2, 1000.0).unwrap();
        let rng = RngStream::new(5150, 0);
        match compute_field_statistics(&p, &geom, &budget, &rng) {
            Ok(st) => {
                println!("--- {tag}");
                println!("eta1 = {:.6} +- {:.2e}   eta2 = {:.6} +- {:.2e}",
                    st.mean_eta[0].value, st.mean_eta[0].std_err,
                    st.mean_eta[1].value, st.mean_eta[1].std_err);
                println!("corr11 = {:.6} +- {:.2e}  corr12 = {:.6} +- {:.2e}  corr22 = {:.6} +- {:.2e}",
                    st.eta_corr[0][0].value, st.eta_corr[0][0].std_err,
                    st.eta_corr[0][1].value, st.eta_corr[0][1].std_err,
                    st.eta_corr[1][1].value, st.eta_corr[1][1].std_err);
                println!("W_ST = {:.6} +- {:.2e}  sigma_bw2 = {:.4e} +- {:.2e}",
                    st.w_st.value, st.w_st.std_err, st.sigma_bw2.value, st.sigma_bw2.std_err);
                println!("theta_mean {:.4} var {:.4e} cov {:.4e}; window {:.4}",
                    st.theta_mean.value, st.theta_var.value, st.theta_cov.value, st.window_radius);
                println!("flags: {:?}", st.flags);
                let wv = p.vacuum_spot_sq().sqrt();
                println!("(W_v = {wv:.6})");
            }
            Err(e) => println!("--- {tag}: ERROR {e}"),
        }
    }
}
