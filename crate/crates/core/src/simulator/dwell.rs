//! Boarding, alighting and holding at a stop.

use super::arrivals::{Passenger, PassengerKind};
use crate::model::PassengerTypes;

/// Waiting passengers of one stop, in arrival order. Boarding is first come
/// first served, so the boarded passengers always form a prefix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StopQueue {
    ids: Vec<usize>,
    next: usize,
}

impl StopQueue {
    pub fn new(ids: Vec<usize>) -> Self {
        Self { ids, next: 0 }
    }

    /// Passengers not yet boarded, including those who have not arrived yet.
    pub fn remaining(&self) -> &[usize] {
        &self.ids[self.next..]
    }
}

/// Everything a stop visit mutates.
pub struct StopContext<'a> {
    pub passengers: &'a mut [Passenger],
    pub queue: &'a mut StopQueue,
    pub onboard: &'a mut Vec<usize>,
    pub capacity: usize,
    pub bus: usize,
    pub stop: usize,
    pub types: &'a PassengerTypes,
}

fn board_time(types: &PassengerTypes, kind: PassengerKind) -> f64 {
    match kind {
        PassengerKind::Slow => types.slow_board_s,
        PassengerKind::Quick => types.quick_board_s,
    }
}

fn alight_time(types: &PassengerTypes, kind: PassengerKind) -> f64 {
    match kind {
        PassengerKind::Slow => types.slow_alight_s,
        PassengerKind::Quick => types.quick_alight_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    pub activation_s: f64,
    pub boarded: usize,
    pub alighted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hold {
    pub departure_s: f64,
    pub idle_hold_s: f64,
    pub boarded: usize,
}

impl StopContext<'_> {
    /// Doors open at `t`: riders for this stop leave while the passengers
    /// already waiting board. The bus is activated when both are done.
    /// Alighting riders free their seats, and are stamped, at `t`.
    pub fn arrive(&mut self, t: f64) -> Arrival {
        let mut alight_s = 0.0;
        let mut alighted = 0;
        let stop = self.stop;
        let passengers = &mut *self.passengers;
        self.onboard.retain(|&id| {
            let p = &mut passengers[id];
            if p.destination != stop {
                return true;
            }
            alight_s += alight_time(self.types, p.kind);
            p.alight_s = Some(t);
            alighted += 1;
            false
        });

        let mut cursor = t;
        let boarded = self.board_while(&mut cursor, |arrive| arrive <= t);
        Arrival { activation_s: t + alight_s.max(cursor - t), boarded, alighted }
    }

    /// Holds for `hold_s` from activation. Anyone arriving strictly before the
    /// scheduled departure may board; boarding that runs past it delays the bus.
    pub fn hold(&mut self, activation_s: f64, hold_s: f64) -> Hold {
        let end = activation_s + hold_s;
        let mut cursor = activation_s;
        let mut busy = 0.0;
        let mut boarded = 0;
        loop {
            let Some(start) = self.board_one(&mut cursor, |arrive| arrive < end) else {
                break;
            };
            busy += cursor.min(end) - start.min(end);
            boarded += 1;
        }
        Hold { departure_s: end.max(cursor), idle_hold_s: hold_s - busy, boarded }
    }

    fn board_while(&mut self, cursor: &mut f64, eligible: impl Fn(f64) -> bool) -> usize {
        let mut n = 0;
        while self.board_one(cursor, &eligible).is_some() {
            n += 1;
        }
        n
    }

    /// Boards the head of the queue if it is eligible and there is room.
    /// Returns the time boarding started and moves `cursor` to its end.
    fn board_one(&mut self, cursor: &mut f64, eligible: impl Fn(f64) -> bool) -> Option<f64> {
        if self.onboard.len() >= self.capacity {
            return None;
        }
        let &id = self.queue.ids.get(self.queue.next)?;
        let p = &mut self.passengers[id];
        if !eligible(p.arrive_s) {
            return None;
        }
        let start = cursor.max(p.arrive_s);
        p.board_s = Some(start);
        p.bus = Some(self.bus);
        *cursor = start + board_time(self.types, p.kind);
        self.queue.next += 1;
        self.onboard.push(id);
        Some(start)
    }
}

/// Both phases of one stop visit: arrival at `t`, activation, then a hold of
/// `hold_s`. Returns `(departure, idle hold, boarded, alighted)`.
pub fn dwell_and_hold(ctx: &mut StopContext<'_>, t: f64, hold_s: f64) -> (f64, f64, usize, usize) {
    let a = ctx.arrive(t);
    let h = ctx.hold(a.activation_s, hold_s);
    (h.departure_s, h.idle_hold_s, a.boarded + h.boarded, a.alighted)
}
