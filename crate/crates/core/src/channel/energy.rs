use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadioPhase {
    Tx(i8),
    /// Receiver on, nothing being demodulated.
    RxListen,
    /// Receiver demodulating a frame.
    RxActive,
    Sleep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel<T> {
    pub voltage: T,
    pub rx_ma: T,
    pub sleep_ma: T,
    /// (dBm, mA) points, ascending in dBm. Linear in between, clamped outside.
    pub tx_table: Vec<(i8, T)>,
}

impl<T: Scalar> Default for EnergyModel<T> {
    fn default() -> Self {
        let mut tx_table = Vec::new();
        for dbm in (2..=20).step_by(2) {
            let ma = 24.0 + (dbm - 2) as f64 * (120.0 - 24.0) / 18.0;
            tx_table.push((dbm as i8, T::lit(ma)));
        }
        for dbm in (22..=30).step_by(2) {
            tx_table.push((dbm as i8, T::lit(120.0 + (dbm - 20) as f64 * 5.0)));
        }
        EnergyModel { voltage: T::lit(3.3), rx_ma: T::lit(11.0), sleep_ma: T::lit(0.001), tx_table }
    }
}

impl<T: Scalar> EnergyModel<T> {
    pub fn tx_current_ma(&self, dbm: i8) -> T {
        let table = &self.tx_table;
        let first = table.first().expect("empty tx table");
        let last = table.last().expect("empty tx table");
        if dbm <= first.0 {
            return first.1;
        }
        if dbm >= last.0 {
            return last.1;
        }
        let i = table.partition_point(|&(p, _)| p <= dbm);
        let (p0, c0) = table[i - 1];
        let (p1, c1) = table[i];
        if p0 == dbm {
            return c0;
        }
        let frac = T::lit((dbm - p0) as f64 / (p1 - p0) as f64);
        c0 + (c1 - c0) * frac
    }

    pub fn current_ma(&self, phase: RadioPhase) -> T {
        match phase {
            RadioPhase::Tx(p) => self.tx_current_ma(p),
            RadioPhase::RxListen | RadioPhase::RxActive => self.rx_ma,
            RadioPhase::Sleep => self.sleep_ma,
        }
    }

    pub fn joules(&self, phase: RadioPhase, seconds: T) -> T {
        self.current_ma(phase) / T::lit(1000.0) * self.voltage * seconds.max(T::zero())
    }
}

/// Accumulated joules per radio phase for one node.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyLedger<T> {
    pub tx: T,
    pub rx_listen: T,
    pub rx_active: T,
    pub sleep: T,
}

impl<T: Scalar> EnergyLedger<T> {
    pub fn new() -> Self {
        EnergyLedger { tx: T::zero(), rx_listen: T::zero(), rx_active: T::zero(), sleep: T::zero() }
    }

    pub fn account(&mut self, model: &EnergyModel<T>, phase: RadioPhase, seconds: T) {
        let j = model.joules(phase, seconds);
        match phase {
            RadioPhase::Tx(_) => self.tx = self.tx + j,
            RadioPhase::RxListen => self.rx_listen = self.rx_listen + j,
            RadioPhase::RxActive => self.rx_active = self.rx_active + j,
            RadioPhase::Sleep => self.sleep = self.sleep + j,
        }
    }

    pub fn total(&self) -> T {
        self.tx + self.rx_listen + self.rx_active + self.sleep
    }

    /// Transmit plus demodulation energy, excluding idle listening and sleep.
    pub fn active(&self) -> T {
        self.tx + self.rx_active
    }

    pub fn merge(&mut self, other: &EnergyLedger<T>) {
        self.tx = self.tx + other.tx;
        self.rx_listen = self.rx_listen + other.rx_listen;
        self.rx_active = self.rx_active + other.rx_active;
        self.sleep = self.sleep + other.sleep;
    }
}
