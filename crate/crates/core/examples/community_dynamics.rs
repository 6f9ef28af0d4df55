//! Simulates the nominal Malawi community until it settles and compares the
//! output with the static map prediction.

use eqalloc::dynamics::{malawi_nominal, NoiseSpec};
use eqalloc::rng::rng_for;

fn main() -> eqalloc::Result<()> {
    let mut model = malawi_nominal();
    let u = [30.0, 3.0];
    let maps = model.static_maps()?;
    println!("static map G =\n{}", maps.g);

    let mut rng = rng_for(7, &[]);
    let noise = NoiseSpec::noiseless();
    for k in 0..=40 {
        if k % 10 == 0 {
            println!("k = {k:>2}  y = {:.4?}", model.output().as_slice());
        }
        model.step(&u, &noise, &mut rng)?;
    }
    let eq = model.equilibrium_for(&u)?;
    println!("equilibrium y = {:.4?}", eq.y_bar.as_slice());
    let (state_res, output_res) = eq.residuals(&model);
    println!("residuals: state {state_res:.1e}, output {output_res:.1e}");
    Ok(())
}
