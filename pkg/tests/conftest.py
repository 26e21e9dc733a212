import math

import numpy as np

from aggsim.config import config_from_dict
from aggsim.engine import EventQueue
from aggsim.protocol import (
    EV_ARRIVAL,
    EV_CTRL,
    EV_DATA_EXPIRE,
    EV_DATA_RESOLVE,
    EV_MSG2,
    EV_MSG3,
    EV_RA_FAIL,
    EV_RACH_ROUND,
    EV_TIMER,
    ProtocolMachine,
)
from aggsim.spatial import Topology
from aggsim.traffic import Packet

NO_ERRORS_DB = -1000.0   # snr threshold low enough for exactly zero outage


def make_cfg(m=1, n=1, rate=1 / 60, b=10, sim_s=60.0, **groups):
    doc = {
        "num_mtds": m, "num_aggregators": n,
        "packet_rate_lambda_app": rate, "bundle_limit": b,
        "sim_length_s": sim_s,
    }
    doc.update(groups)
    return config_from_dict(doc)


class Harness:
    """Drives a ProtocolMachine event by event with hand-placed arrivals,
    for exact trace tests. UE positions are given directly."""

    def __init__(self, config, ue_positions, seed=0):
        positions = np.asarray(ue_positions, dtype=float)
        if config.num_aggregators >= 1:
            assert len(positions) == config.num_aggregators
            topo = Topology(mtd_xy=np.zeros((0, 2)), aggregator_xy=positions,
                            association=None)
        else:
            assert len(positions) == config.num_mtds
            topo = Topology(mtd_xy=positions, aggregator_xy=np.zeros((0, 2)),
                            association=None)
        self.config = config
        self.queue = EventQueue()
        self.trace = []
        self.machine = ProtocolMachine(config, topo, np.random.default_rng(seed),
                                       self.queue, trace=self.trace)
        self.packets = []

    def arrive(self, t_ms, ue_id=0):
        packet = Packet(id=len(self.packets), source_mtd=0, ue_id=ue_id,
                        arrival_time_ms=float(t_ms),
                        size_bytes=self.config.packet_size_bytes)
        self.packets.append(packet)
        self.queue.schedule(math.ceil(t_ms), EV_ARRIVAL, packet.id)
        return packet

    def run_until(self, sf_limit):
        machine = self.machine
        handlers = {
            EV_RACH_ROUND: machine.on_rach_round, EV_MSG2: machine.on_msg2,
            EV_MSG3: machine.on_msg3, EV_CTRL: machine.on_ctrl,
            EV_RA_FAIL: machine.on_ra_fail, EV_DATA_RESOLVE: machine.on_data_resolve,
            EV_DATA_EXPIRE: machine.on_data_expire, EV_TIMER: machine.on_timer,
        }
        while True:
            next_time = self.queue.peek_time()
            if next_time is None or next_time >= sf_limit:
                return
            time, kind, arg = self.queue.pop()
            if kind == EV_ARRIVAL:
                machine.on_packet_arrival(time, self.packets[arg])
            else:
                handlers[kind](time, arg)

    def messages(self, kind=None):
        if kind is None:
            return self.trace
        return [row for row in self.trace if row[2] == kind]
