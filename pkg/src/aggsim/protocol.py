"""Connection lifecycle and radio-resource bookkeeping.

One ProtocolMachine owns every UE context and the per-subframe resource
calendar of a run. It is driven by the engine's event queue: handlers
mutate state and schedule follow-up events through the queue interface.

Model summary (all timing in 1 ms subframes):
  * A random-access opportunity (RAO) occurs every `rao_period_subframes`;
    the whole uplink of an RAO subframe is reserved for PRACH.
  * Idle UEs with data contend at the next RAO with a random preamble.
    Unique preamble -> msg2/msg3/msg4 plus post-msg4 signalling (uplink
    first, alternating), each message 1 subframe of air time followed by
    the processing delay, each consuming 1 CCE plus 1 RB on its direction
    (msg3 uses only the RB granted by msg2). UEs sharing a preamble all
    transmit msg3 on the same grant and learn of the collision only after
    the contention-resolution timeout.
  * Connected UEs request uplink resources on the PUCCH; the grant can
    arrive at the next subframe. At that moment up to `bundle_limit`
    buffered packets are bundled into one transport block. Transmission
    outcomes resolve one processing delay after the last fragment; a lost
    block is retransmitted whole up to the HARQ limit.
  * A connection is torn down when its inactivity timer (renewed by every
    successful transmission) expires with nothing pending.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig
from .link import link_error_probabilities, required_rbs
from .spatial import Topology
from .traffic import DROP_HARQ_EXHAUSTED, DROP_RA_EXHAUSTED, Packet

# RRC states
IDLE = 0
RANDOM_ACCESS = 1
CONNECTED = 2

# Event kinds, dispatched by the engine loop.
EV_ARRIVAL = 0
EV_RACH_ROUND = 1
EV_MSG2 = 2
EV_MSG3 = 3
EV_CTRL = 4          # msg4 and the post-msg4 signalling steps
EV_RA_FAIL = 5
EV_DATA_RESOLVE = 6
EV_DATA_EXPIRE = 7
EV_TIMER = 8


@dataclass(slots=True)
class IncidentCounters:
    tx_error: int = 0
    pdcch_starvation: int = 0
    pusch_starvation: int = 0
    pdsch_starvation: int = 0
    preamble_collisions: int = 0

    def to_dict(self) -> dict:
        return {
            "tx_error": self.tx_error,
            "pdcch_starvation": self.pdcch_starvation,
            "pusch_starvation": self.pusch_starvation,
            "pdsch_starvation": self.pdsch_starvation,
            "preamble_collisions": self.preamble_collisions,
        }


@dataclass(slots=True)
class InflightTb:
    packets: list[Packet]
    total_rbs: int
    retx: int = 0
    last_end_sf: int = 0


@dataclass(slots=True)
class UeContext:
    ue_id: int
    distance_m: float
    p_err_ul: float
    p_err_dl: float
    rrc_state: int = IDLE
    buffer: deque = field(default_factory=deque)
    chosen_preamble: int = -1
    preamble_attempts: int = 0      # msg1 count within the current procedure
    ra_attempts: int = 0            # msg1 count for the head payload
    backoff_deadline: int = 0
    setup_step: int = -1            # 0 = msg4, 1..n = signalling message index
    setup_retx: int = 0
    pending_bundle: int = 0         # bundle size frozen at msg3 (0 = none)
    timer_deadline: int = -1
    inflight: InflightTb | None = None
    # per-UE statistics
    msg1_count: int = 0
    connections: int = 0
    delivered_packets: int = 0
    delivered_bits: int = 0
    latency_sum_ms: float = 0.0


def bundle_at_sr(buffer, limit: int) -> list[Packet]:
    """Pop up to `limit` packets from the head of the buffer; the excess
    stays queued for the next request."""
    if not buffer:
        raise ValueError("cannot bundle from an empty buffer")
    take = min(limit, len(buffer))
    return [buffer.popleft() for _ in range(take)]


def run_rach_round(rng, contenders, num_preambles: int):
    """Draw one preamble per contender; a UE proceeds only when its preamble
    is unique this round. Returns (preambles, proceed flags) aligned with
    `contenders` order."""
    n = len(contenders)
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=bool)
    draws = rng.integers(0, num_preambles, size=n)
    counts = np.bincount(draws, minlength=num_preambles)
    return draws, counts[draws] == 1


class ResourceCalendar:
    """Per-subframe occupancy of uplink RBs (PUSCH), downlink RBs and PDCCH
    CCEs. RAO subframes have no uplink data capacity. Allocation reports
    which resource was missing at the requested subframe so starvation
    incidents can be attributed."""

    def __init__(self, ul_cap, dl_cap, cce_cap, rao_period, frag_threshold):
        self.ul_cap = ul_cap
        self.dl_cap = dl_cap
        self.cce_cap = cce_cap
        self.rao_period = rao_period
        self.frag_threshold = frag_threshold
        self.ul_used: dict[int, int] = {}
        self.dl_used: dict[int, int] = {}
        self.cce_used: dict[int, int] = {}

    def is_rao(self, sf: int) -> bool:
        return sf % self.rao_period == 0

    def _ul_blocked(self, sf: int) -> bool:
        return self.is_rao(sf) or self.ul_used.get(sf, 0) >= self.ul_cap

    def _take_cce(self, sf: int) -> None:
        used = self.cce_used.get(sf, 0) + 1
        assert used <= self.cce_cap, "CCE capacity exceeded"
        self.cce_used[sf] = used

    def _take_dl(self, sf: int) -> None:
        used = self.dl_used.get(sf, 0) + 1
        assert used <= self.dl_cap, "DL RB capacity exceeded"
        self.dl_used[sf] = used

    def _take_ul(self, sf: int, count: int) -> None:
        assert not self.is_rao(sf), "PUSCH allocation in a PRACH subframe"
        used = self.ul_used.get(sf, 0) + count
        assert used <= self.ul_cap, "UL RB capacity exceeded"
        self.ul_used[sf] = used

    def probe_causes(self, sf, need_cce, uplink, downlink):
        causes = set()
        if need_cce and self.cce_used.get(sf, 0) >= self.cce_cap:
            causes.add("cce")
        if uplink and self._ul_blocked(sf):
            causes.add("ul")
        if downlink and self.dl_used.get(sf, 0) >= self.dl_cap:
            causes.add("dl")
        return causes

    def alloc_ctrl(self, desired, window, need_cce, uplink):
        """One control message: 1 RB on its direction plus 1 CCE unless
        `need_cce` is false. Feasible subframes are desired..desired+window;
        returns (subframe, causes) or (None, causes) on expiration."""
        causes = self.probe_causes(desired, need_cce, uplink, not uplink)
        for sf in range(desired, desired + window + 1):
            if need_cce and self.cce_used.get(sf, 0) >= self.cce_cap:
                continue
            if uplink:
                if self._ul_blocked(sf):
                    continue
            elif self.dl_used.get(sf, 0) >= self.dl_cap:
                continue
            if need_cce:
                self._take_cce(sf)
            if uplink:
                self._take_ul(sf, 1)
            else:
                self._take_dl(sf)
            return sf, causes
        return None, causes

    def alloc_data(self, desired, window, rbs_needed):
        """Uplink transport block: one CCE for the grant in the first
        fragment subframe, then greedy RB packing (at most frag_threshold
        per subframe, skipping PRACH and full subframes). The block must
        complete by desired+window. Returns (fragments, causes)."""
        causes = self.probe_causes(desired, True, True, False)
        limit = desired + window
        start = None
        for sf in range(desired, limit + 1):
            if self.cce_used.get(sf, 0) >= self.cce_cap or self._ul_blocked(sf):
                continue
            start = sf
            break
        if start is None:
            return None, causes
        frags = []
        remaining = rbs_needed
        sf = start
        while remaining > 0:
            if sf > limit:
                causes.add("ul")
                return None, causes
            if not self.is_rao(sf):
                free = self.ul_cap - self.ul_used.get(sf, 0)
                take = min(free, self.frag_threshold, remaining)
                if take > 0:
                    frags.append((sf, take))
                    remaining -= take
            sf += 1
        ideal_last = start + (rbs_needed + self.frag_threshold - 1) // self.frag_threshold - 1
        if frags[-1][0] > ideal_last:
            causes.add("ul")
        self._take_cce(start)
        for frag_sf, count in frags:
            self._take_ul(frag_sf, count)
        return frags, causes


@dataclass(slots=True)
class _Group:
    preamble: int
    members: list[int]
    receivers: list[int] = field(default_factory=list)
    msg3_retx: int = 0


class ProtocolMachine:
    """State machine over all UEs of one run; single-threaded by design."""

    def __init__(self, config: ScenarioConfig, topology: Topology, rng, queue,
                 trace=None):
        self.cfg = config
        self.rng = rng
        self.queue = queue
        self.trace = trace
        self.incidents = IncidentCounters()

        t = config.timing
        self.processing = t.processing_time_ms // t.subframe_ms
        self.ra_window = t.ra_msg_deadline_subframes
        self.data_window = t.data_deadline_subframes
        self.cr_timeout = t.contention_resolution_timeout_subframes
        self.rao_period = config.prach.rao_period_subframes
        self.num_preambles = config.prach.num_preambles
        self.backoff_max = config.prach.backoff_subframes
        self.max_ra_attempts = config.prach.max_ra_attempts_per_payload
        self.preamble_trans_max = config.prach.preamble_trans_max
        self.harq_max = config.harq.max_data_retransmissions
        self.n_signalling = config.rrc.post_msg4_signalling_msgs
        self.signalling_costs = config.rrc.signalling_consumes_resources
        self.idle_timeout = config.rrc.idle_timeout_ms // t.subframe_ms
        self.bundle_limit = config.bundle_limit
        self.packet_size = config.packet_size_bytes
        self.tbs_per_rb = config.phy.tbs_bits_per_rb

        self.calendar = ResourceCalendar(
            ul_cap=config.phy.ul_rbs_per_subframe,
            dl_cap=config.phy.dl_rbs_per_subframe,
            cce_cap=config.phy.cces_per_subframe,
            rao_period=self.rao_period,
            frag_threshold=t.fragmentation_threshold_rbs,
        )

        if config.num_aggregators >= 1:
            positions = topology.aggregator_xy
        else:
            positions = topology.mtd_xy
        self.ues = []
        for ue_id, (x, y) in enumerate(positions):
            d = max(float(np.hypot(x, y)), 1e-3)
            p_ul, p_dl = link_error_probabilities(d, config.phy)
            self.ues.append(UeContext(ue_id=ue_id, distance_m=d,
                                      p_err_ul=p_ul, p_err_dl=p_dl))

        self.pending_msg1: dict[int, list[int]] = {}
        self.rach_scheduled: set[int] = set()
        self.last_rach_done = -1
        self.groups: dict[int, _Group] = {}
        self._next_gid = 0

        self.delivered = 0
        self.dropped_ra = 0
        self.dropped_harq = 0

    # -- helpers ---------------------------------------------------------

    def _log(self, sf, ue_id, msg, outcome, resources=""):
        if self.trace is not None:
            self.trace.append((sf, ue_id, msg, outcome, resources))

    def _count_starvation(self, causes):
        if "cce" in causes:
            self.incidents.pdcch_starvation += 1
        if "ul" in causes:
            self.incidents.pusch_starvation += 1
        if "dl" in causes:
            self.incidents.pdsch_starvation += 1

    def _next_rao(self, sf: int) -> int:
        rao = -(-sf // self.rao_period) * self.rao_period
        if rao <= self.last_rach_done:
            rao = self.last_rach_done + self.rao_period
        return rao

    def _register_msg1(self, ue: UeContext, earliest: int) -> None:
        rao = self._next_rao(max(earliest, ue.backoff_deadline))
        self.pending_msg1.setdefault(rao, []).append(ue.ue_id)
        if rao not in self.rach_scheduled:
            self.rach_scheduled.add(rao)
            self.queue.schedule(rao, EV_RACH_ROUND, rao)

    def _renew_timer(self, ue: UeContext, deadline: int) -> None:
        ue.timer_deadline = deadline
        self.queue.schedule(deadline, EV_TIMER, ue.ue_id)

    # -- packet arrivals ---------------------------------------------------

    def on_packet_arrival(self, sf: int, packet: Packet) -> None:
        ue = self.ues[packet.ue_id]
        ue.buffer.append(packet)
        if ue.rrc_state == IDLE:
            ue.rrc_state = RANDOM_ACCESS
            ue.ra_attempts = 0
            ue.preamble_attempts = 0
            ue.backoff_deadline = 0
            self._register_msg1(ue, earliest=sf)
        elif ue.rrc_state == CONNECTED and ue.inflight is None:
            # Immediate scheduling request; the grant can come next subframe.
            self._start_data_tb(ue, sr_sf=sf)
        # otherwise the packet waits in the buffer for the next bundle

    # -- random access -----------------------------------------------------

    def on_rach_round(self, sf: int, _arg: int = 0) -> None:
        self.last_rach_done = sf
        self.rach_scheduled.discard(sf)
        ue_ids = sorted(self.pending_msg1.pop(sf, ()))
        if not ue_ids:
            return
        draws, proceed = run_rach_round(self.rng, ue_ids, self.num_preambles)
        self.incidents.preamble_collisions += int(len(ue_ids) - proceed.sum())
        by_preamble: dict[int, list[int]] = {}
        for ue_id, preamble in zip(ue_ids, draws):
            ue = self.ues[ue_id]
            assert ue.rrc_state == RANDOM_ACCESS
            ue.chosen_preamble = int(preamble)
            ue.ra_attempts += 1
            ue.preamble_attempts += 1
            ue.msg1_count += 1
            by_preamble.setdefault(int(preamble), []).append(ue_id)
            self._log(sf, ue_id, "msg1", "tx", f"preamble={int(preamble)}")
        # One msg2 per detected preamble, served in order of lowest member id.
        for preamble, members in sorted(by_preamble.items(), key=lambda kv: kv[1][0]):
            desired = sf + 1 + self.processing
            s2, causes = self.calendar.alloc_ctrl(desired, self.ra_window,
                                                  need_cce=True, uplink=False)
            self._count_starvation(causes)
            if s2 is None:
                for ue_id in members:
                    self._log(desired, ue_id, "msg2", "expired")
                    self.queue.schedule(desired + self.ra_window, EV_RA_FAIL, ue_id)
                continue
            gid = self._next_gid
            self._next_gid += 1
            self.groups[gid] = _Group(preamble=preamble, members=members)
            self.queue.schedule(s2, EV_MSG2, gid)

    def on_msg2(self, sf: int, gid: int) -> None:
        group = self.groups[gid]
        receivers = []
        for ue_id in group.members:
            ue = self.ues[ue_id]
            if self.rng.random() < ue.p_err_dl:
                # Missed random-access response; retry from msg1.
                self.incidents.tx_error += 1
                self._log(sf, ue_id, "msg2", "error")
                self.queue.schedule(sf + 1 + self.processing, EV_RA_FAIL, ue_id)
            else:
                receivers.append(ue_id)
                self._log(sf, ue_id, "msg2", "ok", "1cce+1dlrb")
        if not receivers:
            del self.groups[gid]
            return
        group.receivers = receivers
        desired = sf + 1 + self.processing
        s3, causes = self.calendar.alloc_ctrl(desired, self.ra_window,
                                              need_cce=False, uplink=True)
        self._count_starvation(causes)
        if s3 is None:
            for ue_id in receivers:
                self._log(desired, ue_id, "msg3", "expired")
                self.queue.schedule(desired + self.ra_window, EV_RA_FAIL, ue_id)
            del self.groups[gid]
            return
        self.queue.schedule(s3, EV_MSG3, gid)

    def on_msg3(self, sf: int, gid: int) -> None:
        group = self.groups[gid]
        receivers = group.receivers
        if len(receivers) >= 2:
            # All sharers transmitted on the same grant; no contention
            # resolution follows and they time out.
            for ue_id in receivers:
                self._log(sf, ue_id, "msg3", "collided", "shared 1ulrb")
                self.queue.schedule(sf + 1 + self.cr_timeout, EV_RA_FAIL, ue_id)
            del self.groups[gid]
            return
        ue_id = receivers[0]
        ue = self.ues[ue_id]
        if self.rng.random() < ue.p_err_ul:
            self.incidents.tx_error += 1
            self._log(sf, ue_id, "msg3", "error")
            if group.msg3_retx < self.harq_max:
                group.msg3_retx += 1
                desired = sf + 1 + self.processing
                s3, causes = self.calendar.alloc_ctrl(desired, self.ra_window,
                                                      need_cce=False, uplink=True)
                self._count_starvation(causes)
                if s3 is None:
                    self.queue.schedule(desired + self.ra_window, EV_RA_FAIL, ue_id)
                    del self.groups[gid]
                else:
                    self.queue.schedule(s3, EV_MSG3, gid)
            else:
                self.queue.schedule(sf + 1 + self.processing, EV_RA_FAIL, ue_id)
                del self.groups[gid]
            return
        self._log(sf, ue_id, "msg3", "ok", "1ulrb")
        del self.groups[gid]
        # The connection request carries the resource demand: the first
        # bundle's size freezes now; later arrivals wait for the next one.
        ue.pending_bundle = min(self.bundle_limit, len(ue.buffer))
        ue.setup_step = 0
        ue.setup_retx = 0
        self._schedule_ctrl_step(ue, desired=sf + 1 + self.processing)

    def _ctrl_step_uplink(self, step: int) -> bool:
        # step 0 is msg4 (downlink); signalling alternates starting uplink
        # (the first message after contention resolution is the UE's).
        return step >= 1 and step % 2 == 1

    def _schedule_ctrl_step(self, ue: UeContext, desired: int) -> None:
        step = ue.setup_step
        uplink = self._ctrl_step_uplink(step)
        if step >= 1 and not self.signalling_costs:
            self.queue.schedule(desired, EV_CTRL, ue.ue_id)
            return
        sf, causes = self.calendar.alloc_ctrl(desired, self.ra_window,
                                              need_cce=True, uplink=uplink)
        self._count_starvation(causes)
        if sf is None:
            self._log(desired, ue.ue_id, self._step_name(step), "expired")
            self.queue.schedule(desired + self.ra_window, EV_RA_FAIL, ue.ue_id)
            return
        self.queue.schedule(sf, EV_CTRL, ue.ue_id)

    @staticmethod
    def _step_name(step: int) -> str:
        return "msg4" if step == 0 else f"sig{step}"

    def on_ctrl(self, sf: int, ue_id: int) -> None:
        ue = self.ues[ue_id]
        step = ue.setup_step
        p_err = ue.p_err_ul if self._ctrl_step_uplink(step) else ue.p_err_dl
        if self.rng.random() < p_err:
            self.incidents.tx_error += 1
            self._log(sf, ue_id, self._step_name(step), "error")
            if ue.setup_retx < self.harq_max:
                ue.setup_retx += 1
                self._schedule_ctrl_step(ue, desired=sf + 1 + self.processing)
            else:
                self.queue.schedule(sf + 1 + self.processing, EV_RA_FAIL, ue_id)
            return
        self._log(sf, ue_id, self._step_name(step), "ok")
        if step >= self.n_signalling:
            self._complete_setup(ue, sf)
        else:
            ue.setup_step += 1
            ue.setup_retx = 0
            self._schedule_ctrl_step(ue, desired=sf + 1 + self.processing)

    def _complete_setup(self, ue: UeContext, sf: int) -> None:
        ue.rrc_state = CONNECTED
        ue.connections += 1
        ue.setup_step = -1
        ue.setup_retx = 0
        ue.preamble_attempts = 0
        ue.ra_attempts = 0
        self._log(sf, ue.ue_id, "connected", "ok")
        self._renew_timer(ue, sf + self.idle_timeout)
        if ue.buffer:
            self._start_data_tb(ue, sr_sf=sf)

    def on_ra_fail(self, sf: int, ue_id: int) -> None:
        ue = self.ues[ue_id]
        assert ue.rrc_state == RANDOM_ACCESS
        ue.setup_step = -1
        ue.setup_retx = 0
        ue.pending_bundle = 0
        if ue.ra_attempts >= self.max_ra_attempts:
            packet = ue.buffer.popleft()
            packet.drop_reason = DROP_RA_EXHAUSTED
            self.dropped_ra += 1
            self._log(sf, ue_id, "payload", "dropped_ra")
            ue.ra_attempts = 0
            ue.preamble_attempts = 0
            ue.backoff_deadline = 0
            if ue.buffer:
                self._register_msg1(ue, earliest=sf)   # next payload, fresh attempt
            else:
                ue.rrc_state = IDLE
            return
        if ue.preamble_attempts >= self.preamble_trans_max:
            ue.preamble_attempts = 0   # procedure aborted, start a new one
        backoff = int(self.rng.integers(0, self.backoff_max + 1))
        ue.backoff_deadline = sf + backoff
        self._register_msg1(ue, earliest=sf)

    # -- data transfer ------------------------------------------------------

    def _start_data_tb(self, ue: UeContext, sr_sf: int) -> None:
        limit = self.bundle_limit
        if ue.pending_bundle:
            limit = ue.pending_bundle
            ue.pending_bundle = 0
        packets = bundle_at_sr(ue.buffer, limit)
        total_bytes = len(packets) * self.packet_size
        ue.inflight = InflightTb(packets=packets,
                                 total_rbs=required_rbs(total_bytes, self.tbs_per_rb))
        self._allocate_data_attempt(ue, desired=sr_sf + 1)

    def _allocate_data_attempt(self, ue: UeContext, desired: int) -> None:
        frags, causes = self.calendar.alloc_data(desired, self.data_window,
                                                 ue.inflight.total_rbs)
        self._count_starvation(causes)
        if frags is None:
            self._log(desired, ue.ue_id, "data", "expired")
            self.queue.schedule(desired + self.data_window, EV_DATA_EXPIRE, ue.ue_id)
            return
        last_sf = frags[-1][0]
        ue.inflight.last_end_sf = last_sf + 1
        self._log(frags[0][0], ue.ue_id, "data", "tx",
                  f"rbs={ue.inflight.total_rbs} frags={len(frags)}")
        self.queue.schedule(last_sf + 1 + self.processing, EV_DATA_RESOLVE, ue.ue_id)

    def _data_attempt_failed(self, ue: UeContext, sf: int) -> None:
        tb = ue.inflight
        if tb.retx < self.harq_max:
            tb.retx += 1
            self._allocate_data_attempt(ue, desired=sf)
            return
        for packet in tb.packets:
            packet.drop_reason = DROP_HARQ_EXHAUSTED
        self.dropped_harq += len(tb.packets)
        self._log(sf, ue.ue_id, "data", "dropped_harq")
        ue.inflight = None
        if ue.buffer:
            self._start_data_tb(ue, sr_sf=sf)

    def on_data_resolve(self, sf: int, ue_id: int) -> None:
        ue = self.ues[ue_id]
        tb = ue.inflight
        if self.rng.random() < ue.p_err_ul:
            self.incidents.tx_error += 1
            self._log(sf, ue_id, "data", "error")
            self._data_attempt_failed(ue, sf)
            return
        delivery_ms = float(tb.last_end_sf)
        for packet in tb.packets:
            packet.delivery_time_ms = delivery_ms
            ue.latency_sum_ms += delivery_ms - packet.arrival_time_ms
        ue.delivered_packets += len(tb.packets)
        ue.delivered_bits += 8 * self.packet_size * len(tb.packets)
        self.delivered += len(tb.packets)
        self._log(sf, ue_id, "data", "delivered", f"n={len(tb.packets)}")
        ue.inflight = None
        self._renew_timer(ue, tb.last_end_sf + self.idle_timeout)
        if ue.buffer:
            self._start_data_tb(ue, sr_sf=sf)

    def on_data_expire(self, sf: int, ue_id: int) -> None:
        self._data_attempt_failed(self.ues[ue_id], sf)

    # -- RRC inactivity ----------------------------------------------------

    def on_timer(self, sf: int, ue_id: int) -> None:
        ue = self.ues[ue_id]
        if ue.rrc_state != CONNECTED or sf < ue.timer_deadline:
            return
        if ue.inflight is None and not ue.buffer:
            ue.rrc_state = IDLE
            ue.timer_deadline = -1
            self._log(sf, ue_id, "rrc", "released")
        else:
            self._renew_timer(ue, sf + self.idle_timeout)
