//! Fits per-country static maps from the shipped expenditure history and
//! shows how a sliding-window refit tracks a single country.

use eqalloc::estimation::{fit_per_community, relearn_step, MapEstimate};
use eqalloc::io::parse_history;
use eqalloc::scenarios::presets::NINE_COUNTRY_HISTORY_CSV;
use nalgebra::DMatrix;

fn main() -> eqalloc::Result<()> {
    let records = parse_history(NINE_COUNTRY_HISTORY_CSV.as_bytes())?;
    println!("{} records", records.len());
    for (community, est) in fit_per_community(&records, None)? {
        println!(
            "community {community}: gain {:.4} from {} samples, residual {:.3}",
            est.g_hat[(0, 0)],
            est.n_samples,
            est.residual(&est.g_hat)
        );
    }

    let mut est = MapEstimate::from_matrix(DMatrix::zeros(1, 1));
    for record in records.iter().filter(|r| r.community == 0) {
        est = relearn_step(&est, record.clone(), Some(10))?;
        if record.period % 5 == 0 {
            println!("{}: windowed gain {:.4}", record.period, est.g_hat[(0, 0)]);
        }
    }
    Ok(())
}
