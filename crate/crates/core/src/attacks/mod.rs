//! Constrained adversarial attacks on attack flows: Carlini-Wagner with an
//! L1 distance, L-infinity PGD and FGSM.

mod constraints;
mod cw;
mod evaluate;
mod gradient;
mod result;

pub use constraints::{project_constraints, AttackConstraints};
pub use cw::{cw_attack, cw_descent_step, CwConfig, DEFAULT_DELTA};
pub use evaluate::{
    attack_all, evaluate_attack, run_attack, AttackMethod, AttackReport, AttackSummary,
    ATTACK_CSV_HEADER,
};
pub use gradient::{fgsm_attack, pgd_linf_attack, PgdConfig};
pub use result::{AdversarialResult, AttackKind};
