//! Concrete open-system scenarios.

pub mod central_spin;
pub mod disorder;
pub mod oscillator;
pub mod three_level;
