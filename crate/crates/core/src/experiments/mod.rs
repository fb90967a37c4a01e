//! Hypothesis certificates, the early-blow-up construction, cut-and-paste
//! locality, and randomized data for the property suites.

pub mod blowup;
pub mod cut_paste;
pub mod hypothesis;
pub mod random;
