//! Runs the scripted press-and-release catapult on the wall variant
//! and prints the box trajectory.

use lob_core::sim::{catapult_script, Env, Variant};
use lob_core::DetRng;
use rand::SeedableRng;

fn main() {
    let mut env = Env::from_variant(Variant::Wall).unwrap();
    let mut rng = DetRng::seed_from_u64(7);
    env.reset(&mut rng);
    let st = env.state();
    println!(
        "box starts at ({:+.4}, {:+.4}), wall band x in [0.275, 0.285]",
        st.box_pos[0], st.box_pos[1]
    );
    let mut apex = f64::MIN;
    for (i, a) in catapult_script().into_iter().enumerate() {
        env.step(&a).unwrap();
        let st = env.state();
        apex = apex.max(st.box_pos[2]);
        println!(
            "step {i:2}  box ({:+.4} {:+.4} {:+.4})  squeeze {:.4}",
            st.box_pos[0], st.box_pos[1], st.box_pos[2], st.compression,
        );
    }
    let end = env.state().box_pos;
    println!("apex {apex:.4}, settled at x = {:.4}", end[0]);
}
