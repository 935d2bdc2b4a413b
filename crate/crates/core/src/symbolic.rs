//! Symbolic encodings of bursting trajectories.
//!
//! A burst of `k` spikes is written as the signed spike count `+k` or `-k`
//! (the sign records how the trajectory is reinserted onto the quiescent
//! manifold) and a subthreshold oscillation as `0`. The equivalent
//! itinerary over `{A..F}` spells the same path through the branched
//! template; its address is the exact dyadic subinterval of `[0, 1]`
//! selected by the signed lexicographical ordering.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::integrator::{
    detector_dvmax, detector_vmax, integrate, Event, EventKind, Integration, IntegratorConfig,
};
use crate::model::{ModelParams, State5};

/// Longest itinerary accepted by [`address`].
pub const MAX_ADDRESS_DEPTH: usize = 4096;

/// Input alphabet of the spike-count encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SymbolEvent {
    /// Local maximum of `V'`.
    I,
    /// Local maximum of `V` above the saddle voltage (a spike).
    VPlus,
    /// Local maximum of `V` at or below the saddle voltage.
    VMinus,
    /// End of input.
    Done,
}

/// Streaming signed spike-count encoder.
///
/// On `VMinus` the spike counter is emitted, negated when the event two
/// positions back was `VPlus`, and reset.
#[derive(Debug, Clone, Default)]
pub struct SscsEncoder {
    spikes: i64,
    prev: Option<SymbolEvent>,
    prev_prev: Option<SymbolEvent>,
    done: bool,
}

impl SscsEncoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed one event; returns the entry completed by it, if any.
    pub fn push(&mut self, ev: SymbolEvent) -> Option<i64> {
        if self.done {
            return None;
        }
        let mut out = None;
        match ev {
            SymbolEvent::VMinus => {
                out = Some(if self.prev_prev == Some(SymbolEvent::VPlus) {
                    -self.spikes
                } else {
                    self.spikes
                });
                self.spikes = 0;
            }
            SymbolEvent::VPlus => self.spikes += 1,
            SymbolEvent::Done => self.done = true,
            SymbolEvent::I => {}
        }
        self.prev_prev = self.prev;
        self.prev = Some(ev);
        out
    }

    /// Spikes counted since the last emitted entry.
    pub fn pending_spikes(&self) -> i64 {
        self.spikes
    }
}

/// Batch form of [`SscsEncoder`]; input after `Done` is ignored.
pub fn encode_sscs(events: &[SymbolEvent]) -> Vec<i64> {
    let mut enc = SscsEncoder::new();
    events.iter().filter_map(|&e| enc.push(e)).collect()
}

/// Map integrator events to encoder symbols in time order. Section and
/// custom events carry no symbol.
pub fn classify_voltage_events(events: &[Event]) -> Vec<SymbolEvent> {
    events
        .iter()
        .filter_map(|e| match e.kind {
            EventKind::DVMax => Some(SymbolEvent::I),
            EventKind::VMaxAbove => Some(SymbolEvent::VPlus),
            EventKind::VMaxBelow => Some(SymbolEvent::VMinus),
            EventKind::SectionCross | EventKind::Custom => None,
        })
        .collect()
}

/// Integrate from `s0` and encode the voltage events on the fly.
///
/// Spikes are maxima of `V` above `v_sd`. The run ends at `cfg.t_max` or
/// once `max_entries` entries have been emitted.
pub fn sscs_from_trajectory(
    s0: &State5,
    p: &ModelParams,
    cfg: &IntegratorConfig,
    v_sd: f64,
    max_entries: Option<usize>,
) -> Result<(Vec<i64>, Integration)> {
    let mut enc = SscsEncoder::new();
    let mut out = Vec::new();
    let detectors = [detector_vmax(v_sd), detector_dvmax()];
    let run = integrate(s0, p, cfg, &detectors, |ev| {
        let sym = match ev.kind {
            EventKind::DVMax => SymbolEvent::I,
            EventKind::VMaxAbove => SymbolEvent::VPlus,
            EventKind::VMaxBelow => SymbolEvent::VMinus,
            _ => return false,
        };
        if let Some(v) = enc.push(sym) {
            out.push(v);
        }
        max_entries.is_some_and(|m| out.len() >= m)
    })?;
    Ok((out, run))
}

/// Comma-separated signed integers.
pub fn format_sscs(s: &[i64]) -> String {
    s.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_sscs(text: &str) -> Result<Vec<i64>> {
    let t = text.trim().trim_start_matches('[').trim_end_matches(']');
    if t.trim().is_empty() {
        return Ok(Vec::new());
    }
    t.split(',')
        .map(|s| {
            s.trim()
                .parse::<i64>()
                .map_err(|e| Error::Parse(format!("{s:?}: {e}")))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    A,
    B,
    C,
    D,
    E,
    F,
}

impl Symbol {
    /// Whether this symbol is the alphabetically-first member of its pair.
    fn is_first(self) -> bool {
        matches!(self, Symbol::A | Symbol::C | Symbol::E)
    }

    /// Symbols that reverse the ordering of all later choices.
    fn flips(self) -> bool {
        matches!(self, Symbol::C | Symbol::E)
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::A => 'A',
            Symbol::B => 'B',
            Symbol::C => 'C',
            Symbol::D => 'D',
            Symbol::E => 'E',
            Symbol::F => 'F',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        Some(match c {
            'A' => Symbol::A,
            'B' => Symbol::B,
            'C' => Symbol::C,
            'D' => Symbol::D,
            'E' => Symbol::E,
            'F' => Symbol::F,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Itinerary(pub Vec<Symbol>);

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.0 {
            write!(f, "{}", s.as_char())?;
        }
        Ok(())
    }
}

impl FromStr for Itinerary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let body = s.trim().trim_start_matches('[').trim_end_matches(']');
        body.chars()
            .filter(|c| !c.is_whitespace())
            .enumerate()
            .map(|(i, c)| {
                Symbol::from_char(c).ok_or_else(|| Error::GrammarViolation {
                    position: i,
                    reason: format!("unknown symbol {c:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()
            .map(Itinerary)
    }
}

impl Itinerary {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Position in the burst grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    /// Between bursts: `A` or `B`.
    Start,
    /// Inside a burst: `C` (last spike) or `D`.
    Burst,
    /// After the last spike: `E` or `F`.
    Reinsert,
}

fn advance(phase: Phase, s: Symbol, position: usize) -> Result<Phase> {
    let bad = |expected: &str| Error::GrammarViolation {
        position,
        reason: format!("expected {expected}, found {}", s.as_char()),
    };
    match (phase, s) {
        (Phase::Start, Symbol::A) => Ok(Phase::Start),
        (Phase::Start, Symbol::B) => Ok(Phase::Burst),
        (Phase::Start, _) => Err(bad("A or B")),
        (Phase::Burst, Symbol::D) => Ok(Phase::Burst),
        (Phase::Burst, Symbol::C) => Ok(Phase::Reinsert),
        (Phase::Burst, _) => Err(bad("C or D")),
        (Phase::Reinsert, Symbol::E | Symbol::F) => Ok(Phase::Start),
        (Phase::Reinsert, _) => Err(bad("E or F")),
    }
}

/// Check the burst grammar. A trailing incomplete burst is allowed; the
/// itinerary must start between bursts.
pub fn validate_itinerary(it: &Itinerary) -> Result<()> {
    let mut phase = Phase::Start;
    for (i, &s) in it.0.iter().enumerate() {
        phase = advance(phase, s, i)?;
    }
    Ok(())
}

/// `0 -> A`, `+k -> B D^(k-1) C E`, `-k -> B D^(k-1) C F`.
pub fn itinerary_from_sscs(s: &[i64]) -> Itinerary {
    let mut out = Vec::new();
    for &k in s {
        if k == 0 {
            out.push(Symbol::A);
            continue;
        }
        out.push(Symbol::B);
        out.extend(std::iter::repeat(Symbol::D).take(k.unsigned_abs() as usize - 1));
        out.push(Symbol::C);
        out.push(if k > 0 { Symbol::E } else { Symbol::F });
    }
    Itinerary(out)
}

/// Inverse of [`itinerary_from_sscs`]; a trailing incomplete burst is an error.
pub fn sscs_from_itinerary(it: &Itinerary) -> Result<Vec<i64>> {
    let mut out = Vec::new();
    let mut phase = Phase::Start;
    let mut count = 0i64;
    for (i, &s) in it.0.iter().enumerate() {
        phase = advance(phase, s, i)?;
        match s {
            Symbol::A => out.push(0),
            Symbol::B | Symbol::D => count += 1,
            Symbol::C => {}
            Symbol::E => {
                out.push(count);
                count = 0;
            }
            Symbol::F => {
                out.push(-count);
                count = 0;
            }
        }
    }
    if phase != Phase::Start {
        return Err(Error::GrammarViolation {
            position: it.len(),
            reason: "itinerary ends inside a burst".into(),
        });
    }
    Ok(out)
}

/// Drop symbols before the first complete burst boundary, i.e. everything up
/// to and including the first `E` or `F` when the itinerary does not start
/// between bursts.
pub fn strip_leading_partial_burst(symbols: &[Symbol]) -> Itinerary {
    let mut phase = Phase::Start;
    for (i, &s) in symbols.iter().enumerate() {
        match advance(phase, s, i) {
            Ok(p) => phase = p,
            Err(_) => {
                let cut = symbols
                    .iter()
                    .position(|s| matches!(s, Symbol::E | Symbol::F))
                    .map_or(symbols.len(), |k| k + 1);
                return Itinerary(symbols[cut..].to_vec());
            }
        }
    }
    Itinerary(symbols.to_vec())
}

/// Dyadic interval `[lo_num, hi_num] / 2^depth`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ItineraryAddress {
    pub lo_num: BigUint,
    pub hi_num: BigUint,
    pub depth: u32,
}

fn reduce(num: &BigUint, depth: u32) -> (BigUint, BigUint) {
    let mut n = num.clone();
    let mut d = depth;
    if n.is_zero() {
        return (n, BigUint::one());
    }
    while d > 0 && (&n % 2u32).is_zero() {
        n >>= 1;
        d -= 1;
    }
    (n, BigUint::one() << d)
}

impl ItineraryAddress {
    /// Lower bound as a reduced fraction `(numerator, denominator)`.
    pub fn lo(&self) -> (BigUint, BigUint) {
        reduce(&self.lo_num, self.depth)
    }

    pub fn hi(&self) -> (BigUint, BigUint) {
        reduce(&self.hi_num, self.depth)
    }

    fn to_f64(num: &BigUint, depth: u32) -> f64 {
        // exact for depth <= 1074 once the numerator fits a double
        let bits = num.bits();
        let shift = bits.saturating_sub(53);
        let top: BigUint = num >> shift;
        let mantissa = top.iter_u64_digits().next().unwrap_or(0) as f64;
        mantissa * 2f64.powi(shift as i32 - depth as i32)
    }

    pub fn lo_f64(&self) -> f64 {
        Self::to_f64(&self.lo_num, self.depth)
    }

    pub fn hi_f64(&self) -> f64 {
        Self::to_f64(&self.hi_num, self.depth)
    }

    /// Numerators brought to a common denominator `2^depth`.
    fn scaled(&self, depth: u32) -> (BigUint, BigUint) {
        let s = depth - self.depth;
        (&self.lo_num << s, &self.hi_num << s)
    }
}

impl fmt::Display for ItineraryAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (a, b) = self.lo();
        let (c, d) = self.hi();
        write!(f, "({a}/{b}, {c}/{d})")
    }
}

/// Address of an itinerary by successive bisection of `[0, 1]`.
///
/// Each symbol halves the interval. The alphabetically-first symbol of its
/// pair (`A`, `C`, `E`) takes the left half while an even number of `C` or
/// `E` symbols precede it, the right half otherwise.
pub fn address(it: &Itinerary) -> Result<ItineraryAddress> {
    if it.len() > MAX_ADDRESS_DEPTH {
        return Err(Error::InvalidArgument(format!(
            "itinerary longer than {MAX_ADDRESS_DEPTH} symbols"
        )));
    }
    validate_itinerary(it)?;
    let mut lo = BigUint::zero();
    let mut flips = 0usize;
    for &s in &it.0 {
        lo <<= 1;
        let left = s.is_first() == (flips % 2 == 0);
        if !left {
            lo += 1u32;
        }
        if s.flips() {
            flips += 1;
        }
    }
    let hi = &lo + 1u32;
    Ok(ItineraryAddress {
        lo_num: lo,
        hi_num: hi,
        depth: it.len() as u32,
    })
}

/// Order of two itineraries under the signed lexicographical ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItineraryOrder {
    /// `a` lies entirely left of `b`.
    Less,
    /// `a` lies entirely right of `b`.
    Greater,
    /// Same interval.
    Equal,
    /// `a`'s interval strictly contains `b`'s (`a` is a prefix of `b`).
    Contains,
    /// `a`'s interval lies strictly inside `b`'s.
    ContainedIn,
}

pub fn compare(a: &Itinerary, b: &Itinerary) -> Result<ItineraryOrder> {
    let x = address(a)?;
    let y = address(b)?;
    let depth = x.depth.max(y.depth);
    let (xl, xh) = x.scaled(depth);
    let (yl, yh) = y.scaled(depth);
    Ok(if xl == yl && xh == yh {
        ItineraryOrder::Equal
    } else if xh <= yl {
        ItineraryOrder::Less
    } else if yh <= xl {
        ItineraryOrder::Greater
    } else if xl <= yl && yh <= xh {
        ItineraryOrder::Contains
    } else {
        ItineraryOrder::ContainedIn
    })
}

impl ItineraryOrder {
    /// Total order when neither interval contains the other.
    pub fn as_ordering(self) -> Option<Ordering> {
        match self {
            ItineraryOrder::Less => Some(Ordering::Less),
            ItineraryOrder::Greater => Some(Ordering::Greater),
            ItineraryOrder::Equal => Some(Ordering::Equal),
            _ => None,
        }
    }
}

/// Phrase count of the Lempel-Ziv (1976) exhaustive-history parse.
///
/// Each phrase is extended while it still occurs as a substring starting
/// earlier in the sequence (overlap allowed); the empty sequence has
/// complexity 0.
pub fn lz76<T: PartialEq>(seq: &[T]) -> usize {
    let n = seq.len();
    if n <= 1 {
        return n;
    }
    // Kaspar-Schuster scan
    let (mut c, mut l, mut i, mut k, mut k_max) = (1usize, 1usize, 0usize, 1usize, 1usize);
    loop {
        if seq[i + k - 1] == seq[l + k - 1] {
            k += 1;
            if l + k > n {
                c += 1;
                break;
            }
        } else {
            k_max = k_max.max(k);
            i += 1;
            if i == l {
                c += 1;
                l += k_max;
                if l + 1 > n {
                    break;
                }
                i = 0;
                k = 1;
                k_max = 1;
            } else {
                k = 1;
            }
        }
    }
    c
}

/// Whether the last `window` entries are periodic with some period `<= max_period`.
///
/// Returns the smallest such period.
pub fn eventual_period<T: PartialEq>(seq: &[T], max_period: usize, window: usize) -> Option<usize> {
    if seq.is_empty() {
        return None;
    }
    let tail = &seq[seq.len().saturating_sub(window)..];
    (1..=max_period.min(tail.len())).find(|&q| {
        tail.len() >= 2 * q && (q..tail.len()).all(|i| tail[i] == tail[i - q])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use SymbolEvent::*;

    fn it(s: &str) -> Itinerary {
        s.parse().unwrap()
    }

    #[test]
    fn encoder_hand_traces() {
        assert_eq!(encode_sscs(&[I, VMinus, Done]), vec![0]);
        assert_eq!(encode_sscs(&[VPlus, VPlus, I, I, VMinus, Done]), vec![2]);
        assert_eq!(encode_sscs(&[VPlus, I, VMinus, Done]), vec![-1]);
        assert!(encode_sscs(&[]).is_empty());
        assert!(encode_sscs(&[VPlus, Done, VMinus]).is_empty());
    }

    #[test]
    fn no_negative_zero_entries() {
        let s = encode_sscs(&[VPlus, VMinus, I, VMinus, VMinus, Done]);
        assert_eq!(s, vec![1, 0, 0]);
    }

    #[test]
    fn itinerary_of_worked_sscs() {
        assert_eq!(
            itinerary_from_sscs(&[0, 2, 3, 2, -2]).to_string(),
            "ABDCEBDDCEBDCEBDCF"
        );
        assert!(itinerary_from_sscs(&[]).is_empty());
        assert_eq!(
            sscs_from_itinerary(&it("ABDCEBDDCEBDCEBDCF")).unwrap(),
            vec![0, 2, 3, 2, -2]
        );
    }

    #[test]
    fn address_follows_flip_rule() {
        let a = address(&it("A")).unwrap();
        assert_eq!(a.to_string(), "(0/1, 1/2)");
        let a = address(&it("ABDCE")).unwrap();
        assert_eq!(a.to_string(), "(13/32, 7/16)");
        let steps: Vec<String> = (1..=5)
            .map(|k| address(&it(&"ABDCE"[..k])).unwrap().to_string())
            .collect();
        assert_eq!(
            steps,
            ["(0/1, 1/2)", "(1/4, 1/2)", "(3/8, 1/2)", "(3/8, 7/16)", "(13/32, 7/16)"]
        );
    }

    #[test]
    fn grammar_violations() {
        assert!(matches!(
            address(&it("DDCF")),
            Err(Error::GrammarViolation { position: 0, .. })
        ));
        assert!(matches!(
            address(&it("BDE")),
            Err(Error::GrammarViolation { position: 2, .. })
        ));
        assert!("ABX".parse::<Itinerary>().is_err());
        assert!(sscs_from_itinerary(&it("ABD")).is_err());
    }

    #[test]
    fn strip_partial_burst() {
        let raw = it("DDDDCFABDCEBDDCEBDCEBDCFBDDD");
        assert_eq!(
            strip_leading_partial_burst(&raw.0).to_string(),
            "ABDCEBDDCEBDCEBDCFBDDD"
        );
        let clean = it("ABDCE");
        assert_eq!(strip_leading_partial_burst(&clean.0), clean);
    }

    #[test]
    fn compare_cases() {
        assert_eq!(compare(&it("A"), &it("BDCE")).unwrap(), ItineraryOrder::Less);
        assert_eq!(compare(&it("AB"), &it("ABDCE")).unwrap(), ItineraryOrder::Contains);
        assert_eq!(
            compare(&it("ABDCE"), &it("AB")).unwrap(),
            ItineraryOrder::ContainedIn
        );
        assert_eq!(compare(&it("AB"), &it("AB")).unwrap(), ItineraryOrder::Equal);
    }

    #[test]
    fn lz76_reference_values() {
        assert_eq!(lz76(&['a']), 1);
        assert_eq!(lz76(&['a'; 16]), 2);
        let bits: Vec<char> = "0001101001000101".chars().collect();
        assert_eq!(lz76(&bits), 6);
        assert_eq!(lz76::<u8>(&[]), 0);
    }

    #[test]
    fn eventual_period_detection() {
        let mut s = vec![5, -3, 1];
        s.extend([2, 3].repeat(200));
        assert_eq!(eventual_period(&s, 32, 256), Some(2));
        let noise: Vec<i64> = (0..300).map(|i| (i * i * 7 + i / 3) % 11).collect();
        assert_eq!(eventual_period(&noise, 32, 256), None);
    }

    #[test]
    fn sscs_text_round_trip() {
        let s = vec![1, 0, 4, -1];
        assert_eq!(parse_sscs(&format_sscs(&s)).unwrap(), s);
        assert_eq!(parse_sscs("[1, -2]").unwrap(), vec![1, -2]);
        assert!(parse_sscs("").unwrap().is_empty());
    }
}
