//! Fee policies and the hop-by-hop fee recursion.
//!
//! All four policies are pure evaluators over the same four-input domain:
//! the channel balance in the payment direction (`c_minus`), the reverse
//! balance (`c_plus`), the channel's reference point, and the value to
//! forward. The two balance-incentive policies price a payment by how far it
//! moves the channel from its reference point; the Lightning and di Stasi
//! policies are the deployed baselines.

use thiserror::Error;

use crate::network::ChannelView;

pub const DEFAULT_BASE_FEE: f64 = 1.0;
pub const DEFAULT_FEE_RATE: f64 = 1e-6;
pub const DEFAULT_RATE_LOW: f64 = 0.01;
pub const DEFAULT_RATE_HIGH: f64 = 0.03;
pub const DEFAULT_FACTOR: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum FeeError {
    #[error("fee inputs must be non-negative and finite")]
    NegativeInput,
    #[error("channel capacity must be positive, got {0}")]
    NonPositiveCapacity(f64),
    #[error("value {x} exceeds the directed balance {c_minus}")]
    ValueExceedsBalance { x: f64, c_minus: f64 },
    #[error("reference point {reference} outside [0, {capacity}]")]
    ReferenceOutOfRange { reference: f64, capacity: f64 },
    #[error("invalid fee policy parameters: {0}")]
    InvalidParameters(&'static str),
}

/// One evaluation point of a fee function: channel state in the payment
/// direction plus the value to forward on this channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeeInput {
    pub c_minus: f64,
    pub c_plus: f64,
    pub reference: f64,
    pub x: f64,
}

impl FeeInput {
    pub fn new(c_minus: f64, c_plus: f64, reference: f64, x: f64) -> Self {
        Self {
            c_minus,
            c_plus,
            reference,
            x,
        }
    }

    pub fn from_view(view: &ChannelView, x: f64) -> Self {
        Self {
            c_minus: view.balance_out,
            c_plus: view.balance_in,
            reference: view.reference,
            x,
        }
    }

    pub fn capacity(&self) -> f64 {
        self.c_minus + self.c_plus
    }

    /// Checks membership in the input domain: non-negative components,
    /// positive total capacity, value within the directed balance, reference
    /// point within the capacity.
    pub fn validate(&self) -> Result<(), FeeError> {
        let all = [self.c_minus, self.c_plus, self.reference, self.x];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(FeeError::NegativeInput);
        }
        let capacity = self.capacity();
        if !(capacity > 0.0) {
            return Err(FeeError::NonPositiveCapacity(capacity));
        }
        if self.x > self.c_minus {
            return Err(FeeError::ValueExceedsBalance {
                x: self.x,
                c_minus: self.c_minus,
            });
        }
        if self.reference > capacity {
            return Err(FeeError::ReferenceOutOfRange {
                reference: self.reference,
                capacity,
            });
        }
        Ok(())
    }
}

/// The four fee policies of the simulation.
///
/// `MerchantV1` charges every hop, discounted (down to `0`) when the payment
/// moves the balance toward the reference point. `MerchantV2` charges nothing
/// for such payments and only prices deterioration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FeePolicy {
    /// Constant base fee plus a rate linear in the forwarded value.
    Lightning { base_fee: f64, fee_rate: f64 },
    /// Lightning-style fee with a steeper rate for the part of the value
    /// that pushes the balance below half the capacity.
    DiStasi {
        base_fee: f64,
        rate_low: f64,
        rate_high: f64,
    },
    /// `(1 + (|c- - x - ref| - |c- - ref|) / capacity) * factor`
    MerchantV1 { factor: f64 },
    /// Zero when the balance improves, otherwise the distance increase
    /// scaled by `factor / capacity`.
    MerchantV2 { factor: f64 },
}

impl FeePolicy {
    pub fn lightning() -> Self {
        FeePolicy::Lightning {
            base_fee: DEFAULT_BASE_FEE,
            fee_rate: DEFAULT_FEE_RATE,
        }
    }

    pub fn distasi() -> Self {
        FeePolicy::DiStasi {
            base_fee: DEFAULT_BASE_FEE,
            rate_low: DEFAULT_RATE_LOW,
            rate_high: DEFAULT_RATE_HIGH,
        }
    }

    pub fn merchant_v1() -> Self {
        FeePolicy::MerchantV1 {
            factor: DEFAULT_FACTOR,
        }
    }

    pub fn merchant_v2() -> Self {
        FeePolicy::MerchantV2 {
            factor: DEFAULT_FACTOR,
        }
    }

    /// Stable identifier used in reports and config files.
    pub fn name(&self) -> &'static str {
        match self {
            FeePolicy::Lightning { .. } => "lightning",
            FeePolicy::DiStasi { .. } => "distasi",
            FeePolicy::MerchantV1 { .. } => "merchant_v1",
            FeePolicy::MerchantV2 { .. } => "merchant_v2",
        }
    }

    pub fn validate(&self) -> Result<(), FeeError> {
        match *self {
            FeePolicy::Lightning { base_fee, fee_rate } => {
                if !(base_fee >= 0.0) || !(fee_rate >= 0.0) {
                    return Err(FeeError::InvalidParameters(
                        "base fee and fee rate must be non-negative",
                    ));
                }
            }
            FeePolicy::DiStasi {
                base_fee,
                rate_low,
                rate_high,
            } => {
                if !(base_fee >= 0.0) || !(rate_low >= 0.0) {
                    return Err(FeeError::InvalidParameters(
                        "base fee and rates must be non-negative",
                    ));
                }
                if !(rate_high > rate_low) {
                    return Err(FeeError::InvalidParameters(
                        "deteriorating rate must exceed the non-deteriorating rate",
                    ));
                }
            }
            FeePolicy::MerchantV1 { factor } | FeePolicy::MerchantV2 { factor } => {
                if !(factor > 0.0) {
                    return Err(FeeError::InvalidParameters("factor must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Fee for forwarding `input.x` over a channel in state `input`,
    /// validated against the input domain.
    pub fn fee(&self, input: &FeeInput) -> Result<f64, FeeError> {
        input.validate()?;
        Ok(self.fee_raw(input.c_minus, input.c_plus, input.reference, input.x))
    }

    /// Unchecked evaluation. Routing uses this to price loads that may turn
    /// out to exceed the directed balance; such paths are rejected later by
    /// the balance checks, not by the fee math.
    pub fn fee_raw(&self, c_minus: f64, c_plus: f64, reference: f64, x: f64) -> f64 {
        match *self {
            FeePolicy::Lightning { base_fee, fee_rate } => base_fee + fee_rate * x,
            FeePolicy::DiStasi {
                base_fee,
                rate_low,
                rate_high,
            } => {
                // Split the value at the half-capacity mark: the part above
                // it keeps the low rate, the part below pays the high rate.
                let half = (c_minus + c_plus) / 2.0;
                let (low_part, high_part) = if c_minus < half {
                    (0.0, x)
                } else if c_minus - x >= half {
                    (x, 0.0)
                } else {
                    let low = c_minus - half;
                    (low, x - low)
                };
                base_fee + low_part * rate_low + high_part * rate_high
            }
            FeePolicy::MerchantV1 { factor } => {
                let capacity = c_minus + c_plus;
                let shift = (c_minus - x - reference).abs() - (c_minus - reference).abs();
                (1.0 + shift / capacity) * factor
            }
            FeePolicy::MerchantV2 { factor } => {
                let capacity = c_minus + c_plus;
                let shift = (c_minus - x - reference).abs() - (c_minus - reference).abs();
                if shift <= 0.0 {
                    0.0
                } else {
                    shift / capacity * factor
                }
            }
        }
    }
}

/// Per-hop breakdown of one path: `fees[j]` is charged for hop `j` and
/// `loads[j]` is the value forwarded over it. `fees[0]` is always zero since
/// the sender owns the first channel.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathFees {
    pub fees: Vec<f64>,
    pub loads: Vec<f64>,
    pub total: f64,
}

impl PathFees {
    /// Value the first channel has to carry: the payment plus all fees.
    pub fn carried_value(&self, tx: f64) -> f64 {
        self.loads.first().copied().unwrap_or(tx)
    }
}

/// Computes per-hop fees for a payment of `tx` along `hops` (channel states
/// in path order), iterating backward from the last channel: the last hop
/// forwards exactly `tx`, and each earlier hop forwards the downstream load
/// plus the downstream fee. Feasibility against balances is the router's
/// job, not checked here.
pub fn path_fees(policy: &FeePolicy, hops: &[ChannelView], tx: f64) -> PathFees {
    let len = hops.len();
    let mut fees = vec![0.0; len];
    let mut loads = vec![0.0; len];
    if len == 0 {
        return PathFees {
            fees,
            loads,
            total: 0.0,
        };
    }
    let mut load = tx;
    for j in (0..len).rev() {
        loads[j] = load;
        if j > 0 {
            let view = &hops[j];
            fees[j] = policy.fee_raw(view.balance_out, view.balance_in, view.reference, load);
            load += fees[j];
        }
    }
    let total = fees.iter().sum();
    PathFees { fees, loads, total }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-9;

    fn view(balance_out: f64, balance_in: f64, reference: f64) -> ChannelView {
        ChannelView {
            balance_out,
            balance_in,
            reference,
        }
    }

    #[test]
    fn lightning_fee_is_base_plus_rate() {
        let policy = FeePolicy::lightning();
        let input = FeeInput::new(1e9, 1e9, 1e9, 0.0);
        assert_eq!(policy.fee(&input).unwrap(), 1.0);
        let input = FeeInput::new(1e9, 1e9, 1e9, 100.0);
        assert!((policy.fee(&input).unwrap() - 1.0001).abs() < EPS);
        let input = FeeInput::new(2e6, 1e6, 1e6, 1_200_000.0);
        assert!((policy.fee(&input).unwrap() - 2.2).abs() < EPS);
    }

    #[test]
    fn distasi_splits_at_half_capacity() {
        let policy = FeePolicy::distasi();
        // Straddling the half-capacity mark: 50 at the low rate, 50 high.
        let fee = policy.fee(&FeeInput::new(150.0, 50.0, 100.0, 100.0)).unwrap();
        assert!((fee - 3.0).abs() < EPS);
        // Already below half capacity: everything at the high rate.
        let fee = policy.fee(&FeeInput::new(80.0, 120.0, 100.0, 50.0)).unwrap();
        assert!((fee - 2.5).abs() < EPS);
        // Staying above half capacity: everything at the low rate.
        let fee = policy.fee(&FeeInput::new(180.0, 20.0, 100.0, 50.0)).unwrap();
        assert!((fee - (1.0 + 0.5)).abs() < EPS);
        // Zero value pays the base fee only.
        let fee = policy.fee(&FeeInput::new(80.0, 120.0, 100.0, 0.0)).unwrap();
        assert!((fee - 1.0).abs() < EPS);
    }

    #[test]
    fn merchant_v1_discounts_balance_improvement() {
        let policy = FeePolicy::merchant_v1();
        let fee = policy.fee(&FeeInput::new(200.0, 0.0, 100.0, 100.0)).unwrap();
        assert!((fee - 0.5).abs() < EPS);
        let fee = policy.fee(&FeeInput::new(200.0, 0.0, 100.0, 200.0)).unwrap();
        assert!((fee - 1.0).abs() < EPS);
        let fee = policy.fee(&FeeInput::new(42.0, 58.0, 13.0, 0.0)).unwrap();
        assert!((fee - 1.0).abs() < EPS);
    }

    #[test]
    fn merchant_v2_is_free_for_improvement() {
        let policy = FeePolicy::merchant_v2();
        let fee = policy.fee(&FeeInput::new(200.0, 0.0, 100.0, 100.0)).unwrap();
        assert_eq!(fee, 0.0);
        let fee = policy.fee(&FeeInput::new(100.0, 100.0, 100.0, 50.0)).unwrap();
        assert!((fee - 0.25).abs() < EPS);
        let fee = policy.fee(&FeeInput::new(77.0, 23.0, 60.0, 0.0)).unwrap();
        assert_eq!(fee, 0.0);
    }

    #[test]
    fn domain_violations_are_rejected() {
        let policy = FeePolicy::merchant_v1();
        assert_eq!(
            policy.fee(&FeeInput::new(10.0, 5.0, 3.0, 11.0)),
            Err(FeeError::ValueExceedsBalance { x: 11.0, c_minus: 10.0 })
        );
        assert_eq!(
            policy.fee(&FeeInput::new(0.0, 0.0, 0.0, 0.0)),
            Err(FeeError::NonPositiveCapacity(0.0))
        );
        assert_eq!(
            policy.fee(&FeeInput::new(10.0, 5.0, 16.0, 1.0)),
            Err(FeeError::ReferenceOutOfRange {
                reference: 16.0,
                capacity: 15.0
            })
        );
        assert_eq!(
            policy.fee(&FeeInput::new(-1.0, 5.0, 1.0, 0.0)),
            Err(FeeError::NegativeInput)
        );
    }

    #[test]
    fn policy_parameter_validation() {
        assert!(FeePolicy::lightning().validate().is_ok());
        assert!(FeePolicy::DiStasi {
            base_fee: 1.0,
            rate_low: 0.03,
            rate_high: 0.01
        }
        .validate()
        .is_err());
        assert!(FeePolicy::MerchantV1 { factor: 0.0 }.validate().is_err());
    }

    #[test]
    fn single_hop_path_is_free() {
        for policy in [
            FeePolicy::lightning(),
            FeePolicy::distasi(),
            FeePolicy::merchant_v1(),
            FeePolicy::merchant_v2(),
        ] {
            let result = path_fees(&policy, &[view(1000.0, 0.0, 500.0)], 10.0);
            assert_eq!(result.total, 0.0);
            assert_eq!(result.fees, vec![0.0]);
            assert_eq!(result.loads, vec![10.0]);
        }
    }

    #[test]
    fn three_hop_lightning_recursion() {
        let policy = FeePolicy::lightning();
        let hops = [
            view(1e6, 1e6, 1e6),
            view(1e6, 1e6, 1e6),
            view(1e6, 1e6, 1e6),
        ];
        let result = path_fees(&policy, &hops, 100.0);
        assert!((result.fees[2] - 1.0001).abs() < EPS);
        assert!((result.fees[1] - 1.0001010001).abs() < EPS);
        assert_eq!(result.fees[0], 0.0);
        assert!((result.total - 2.0002010001).abs() < EPS);
        assert!((result.carried_value(100.0) - 102.0002010001).abs() < EPS);
        assert_eq!(result.loads[2], 100.0);
    }

    #[test]
    fn merchant_v2_two_hop_improvement_is_free() {
        let policy = FeePolicy::merchant_v2();
        // Second hop moves the balance toward the reference point.
        let hops = [view(500.0, 500.0, 500.0), view(800.0, 200.0, 500.0)];
        let result = path_fees(&policy, &hops, 100.0);
        assert_eq!(result.total, 0.0);
        assert_eq!(result.loads[0], 100.0);
    }

    #[test]
    fn empty_path_carries_value_without_fees() {
        let result = path_fees(&FeePolicy::lightning(), &[], 42.0);
        assert_eq!(result.total, 0.0);
        assert_eq!(result.carried_value(42.0), 42.0);
    }
}
