//! The three proximal maps used for variable selection.

use nalgebra::DVector;
use randmv::prox::{project_simplex, prox_sparse_group, soft_threshold};
use randmv::GroupStructure;

fn main() -> randmv::Result<()> {
    let v = DVector::from_vec(vec![0.8, 0.3, -0.2, 1.5, 0.05, -0.9]);
    println!("v                 {:?}", v.as_slice());
    println!("simplex           {:?}", project_simplex(&v).as_slice());
    println!("soft threshold .1 {:?}", soft_threshold(&v, 0.1).as_slice());

    // variables 1-3 form one group, 4-6 another
    let groups = GroupStructure::from_labels(&[0, 0, 0, 1, 1, 1])?;
    for (lasso, group) in [(0.1, 0.1), (0.1, 0.5), (0.3, 0.6)] {
        let out = prox_sparse_group(&v, lasso, group, &groups)?;
        println!("sparse group ({lasso}, {group}) {:?}", out.as_slice());
    }
    Ok(())
}
