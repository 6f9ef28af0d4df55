//! Projects infeasible allocations onto capped and exact budget sets.

use eqalloc::feasible::BudgetSet;
use eqalloc::profile::Profile;

fn main() -> eqalloc::Result<()> {
    let wish = Profile::from_rows(vec![vec![5.0, 1.0], vec![-1.0, 2.0], vec![2.0, 0.5]])?;
    println!("requested  {:?}", wish.to_rows());

    let cap = BudgetSet::cap(vec![4.0, 5.0]);
    println!("cap (4, 5) {:?}", cap.project(&wish)?.to_rows());

    let floor = Profile::filled(3, 2, 0.5);
    let exact = BudgetSet::exact(vec![6.0, 3.0], Some(floor));
    let p = exact.project(&wish)?;
    println!("exact (6, 3) with floor 0.5 {:?}", p.to_rows());
    println!("feasible: {}", exact.is_feasible(&p, 1e-12));
    Ok(())
}
