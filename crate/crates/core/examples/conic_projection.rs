//! The conic solver on a small projection problem and the closed-form
//! projection onto `{u v >= k^2}`.

use nalgebra::{DMatrix, DVector};
use voltstab::conic::{project_hyperbolic, solve, ConicOptions, ConicProblem};

fn main() -> voltstab::Result<()> {
    let (u0, v0, k) = (3.0, 0.5, 2.0);
    let mut p = ConicProblem::least_squares(DMatrix::identity(2, 2), DVector::from_vec(vec![u0, v0]));
    p.add_hyperbolic(0, 1, k);
    let sol = solve(&p, &ConicOptions::default())?;
    println!(
        "solver:      ({:.9}, {:.9}) {:?} in {} Newton steps, kkt {:.1e}",
        sol.x[0], sol.x[1], sol.status, sol.iterations, sol.kkt_residual
    );
    let (u, v) = project_hyperbolic(u0, v0, k);
    println!("closed form: ({u:.9}, {v:.9})");

    p.add_ineq(&[(0, 1.0), (1, 1.0)], 4.5);
    let sol = solve(&p, &ConicOptions::default())?;
    println!("with u + v <= 4.5: ({:.9}, {:.9}) {:?}", sol.x[0], sol.x[1], sol.status);
    Ok(())
}
