//! Acquisition-chain model: sense resistor, ADC quantization, NTC rounding.
//!
//! Current is sensed as the difference between two independently quantized
//! voltage channels across a series resistor, which is exactly the mechanism
//! that injects drift into an accumulated-capacity count: each channel
//! rounds to the nearest LSB on its own, so the digital difference can be
//! off by up to one LSB, i.e. `lsb / r_sens` of current per sample.
//!
//! Channel inputs are battery-referred volts. The front-end divider that
//! scales a 3-4.2 V terminal into the converter's input range is not modeled
//! explicitly; the `lsb` field expresses the step a channel resolves in
//! battery-referred terms, and [`AdcModel::quantize`] additionally exposes
//! the converter's raw code span for saturation behavior.

use crate::gauge::Sample;

/// ADC resolution model. Rounding is to the nearest step, ties to even.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdcModel {
    /// Converter resolution in bits.
    pub bits: u32,
    /// Smallest resolvable voltage step, in volts.
    pub lsb: f64,
}

impl Default for AdcModel {
    fn default() -> Self {
        AdcModel { bits: 10, lsb: 0.001 }
    }
}

impl AdcModel {
    pub fn new(bits: u32, lsb: f64) -> Self {
        assert!(bits >= 1, "ADC needs at least one bit");
        assert!(lsb > 0.0, "LSB must be positive");
        AdcModel { bits, lsb }
    }

    /// Highest representable voltage: the top code times the LSB.
    pub fn full_scale(&self) -> f64 {
        (((1u64 << self.bits) - 1) as f64) * self.lsb
    }

    /// Quantizes a raw converter input: round to the nearest LSB, saturating
    /// at code zero and at the top code.
    pub fn quantize(&self, v: f64) -> f64 {
        debug_assert!(v >= 0.0, "ADC inputs are unipolar");
        self.channel(v).min(self.full_scale())
    }

    /// Quantizes a battery-referred channel reading: round to the nearest
    /// LSB with no top-code saturation, the divider ahead of the converter
    /// being assumed to keep the channel in range.
    pub fn channel(&self, v: f64) -> f64 {
        ((v / self.lsb).round_ties_even() * self.lsb).max(0.0)
    }
}

/// The series sense resistor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SenseCircuit {
    /// Sense resistance in ohms.
    pub r_sens: f64,
}

impl Default for SenseCircuit {
    fn default() -> Self {
        SenseCircuit { r_sens: 0.1 }
    }
}

impl SenseCircuit {
    pub fn new(r_sens: f64) -> Self {
        assert!(r_sens > 0.0, "sense resistance must be positive");
        SenseCircuit { r_sens }
    }

    /// Heat dissipated in the sense resistor at `i` mA, in watts.
    pub fn dissipation_watts(&self, i: f64) -> f64 {
        let amps = i / 1000.0;
        amps * amps * self.r_sens
    }
}

/// Current from the quantized voltages at the two sense-resistor terminals,
/// in mA. Each terminal is its own ADC channel; the difference is taken
/// digitally, so a 1 mV step across 0.1 ohm resolves 10 mA.
pub fn sense_current(v_packplus: f64, v_bat: f64, circuit: &SenseCircuit, adc: &AdcModel) -> f64 {
    (adc.channel(v_packplus) - adc.channel(v_bat)) / circuit.r_sens * 1000.0
}

/// Builds the sample the gauge sees from the cell's true outputs: terminal
/// voltage quantized, current sensed across the synthesized terminal pair
/// `(v_terminal + i_true * r_sens / 1000, v_terminal)`, temperature rounded
/// to the nearest degree by the NTC model.
pub fn measure(truth: &Sample, circuit: &SenseCircuit, adc: &AdcModel) -> Sample {
    let v_packplus = truth.v_bat + truth.i_bat * circuit.r_sens / 1000.0;
    Sample {
        t: truth.t,
        i_bat: sense_current(v_packplus, truth.v_bat, circuit, adc),
        v_bat: adc.channel(truth.v_bat),
        temp: truth.temp.round_ties_even(),
    }
}
