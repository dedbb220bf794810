//! A single device's Gauss-Markov walk inside the cell: temporally
//! correlated velocity and heading, with specular reflection off the
//! cell boundary. Prints a trace suitable for piping into gnuplot.
//!
//! ```text
//! cargo run --release -p loracell --example mobility_trace > walk.dat
//! gnuplot -e "plot 'walk.dat' using 2:3 with lines; pause -1"
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use loracell::sim::{gauss_markov_step, GaussMarkovParams, MobileState};

fn main() {
    let gm = GaussMarkovParams {
        mean_velocity_kmh: 30.0,
        velocity_sigma_kmh: 10.0,
        heading_sigma_rad: 0.5,
        alpha: 0.75,
        step_s: 60.0,
    };
    let radius_m = 4500.0;
    let mut state = MobileState {
        x_m: 1000.0,
        y_m: 0.0,
        velocity_kmh: gm.mean_velocity_kmh,
        heading_rad: 0.6,
        mean_heading_rad: 0.6,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let normal = StandardNormal;

    println!("# minute x_m y_m velocity_kmh distance_m");
    let mut reflections = 0u32;
    for minute in 0..240 {
        println!(
            "{minute:4} {:10.2} {:10.2} {:7.3} {:9.2}",
            state.x_m,
            state.y_m,
            state.velocity_kmh,
            state.distance_m()
        );
        let w_v: f64 = normal.sample(&mut rng);
        let w_h: f64 = normal.sample(&mut rng);
        if gauss_markov_step(&mut state, &gm, radius_m, w_v, w_h) {
            reflections += 1;
        }
    }
    eprintln!(
        "4 h walk at {} km/h mean: {reflections} boundary reflections, \
         final distance {:.0} m of {radius_m} m",
        gm.mean_velocity_kmh,
        state.distance_m()
    );
}
