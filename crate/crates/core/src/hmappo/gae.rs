use crate::error::DomainError;

/// Generalized advantage estimation over one trajectory.
///
/// `dones[t]` marks a terminal transition: no bootstrapping from the next
/// state and no advantage carried backwards across it. `bootstrap` is the
/// value of the state following the last transition (ignored if that
/// transition is terminal). Returns `(advantages, returns)` with
/// `returns = advantages + values`.
pub fn compute_gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), DomainError> {
    let n = rewards.len();
    if values.len() != n {
        return Err(DomainError::LengthMismatch {
            what: "values vs rewards",
            expected: n,
            got: values.len(),
        });
    }
    if dones.len() != n {
        return Err(DomainError::LengthMismatch {
            what: "done flags vs rewards",
            expected: n,
            got: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        next_adv = delta + gamma * lambda * live * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, returns))
}
