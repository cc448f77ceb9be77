import numpy as np
import pytest
from oracles import line_topology, maxmin_oracle, random_maxmin_instance

from fednetsim.netsim import (
    EventKind,
    FlowKind,
    FlowSim,
    allocate_rates,
    elastic_flow,
    inelastic_flow,
    transfer_time_components,
)


class TestAllocateRates:
    def test_two_flows_share_equally(self):
        topo, links = line_topology(1)
        f1 = elastic_flow("f1", "h1", "h2", (links[0],), 1e6)
        f2 = elastic_flow("f2", "h1", "h2", (links[0],), 1e6)
        rates = allocate_rates([f1, f2], topo)
        assert rates == {"f1": 50.0, "f2": 50.0}

    def test_progressive_filling_hand_case(self):
        # A=100, B=50; f1 on A, f2 on A+B, f3 on B -> 75 / 25 / 25
        topo, links = line_topology(2, bandwidths=[100.0, 50.0])
        f1 = elastic_flow("f1", "h1", "h2", (links[0],), 1e6)
        f2 = elastic_flow("f2", "h1", "h3", (links[0], links[1]), 1e6)
        f3 = elastic_flow("f3", "h2", "h3", (links[1],), 1e6)
        rates = allocate_rates([f1, f2, f3], topo)
        assert rates["f1"] == pytest.approx(75.0, abs=1e-9)
        assert rates["f2"] == pytest.approx(25.0, abs=1e-9)
        assert rates["f3"] == pytest.approx(25.0, abs=1e-9)

    def test_inelastic_demand_caps(self):
        topo, links = line_topology(1)
        bg = inelastic_flow("bg", "h1", "h2", (links[0],), demand_mbps=30.0)
        fl = elastic_flow("fl", "h1", "h2", (links[0],), 1e6)
        rates = allocate_rates([bg, fl], topo)
        assert rates["bg"] == pytest.approx(30.0, abs=1e-9)
        assert rates["fl"] == pytest.approx(70.0, abs=1e-9)

    def test_matches_exact_oracle_on_random_instances(self):
        rng = np.random.default_rng(20240811)
        for _ in range(300):
            topo, flows, paths, caps, demands = random_maxmin_instance(rng)
            rates = allocate_rates(flows, topo)
            expected = maxmin_oracle(paths, caps, demands)
            for fid, want in expected.items():
                assert rates[fid] == pytest.approx(float(want), abs=1e-9), (
                    f"flow {fid}: got {rates[fid]}, oracle {float(want)}"
                )

    def test_capacity_and_bottleneck_certificate(self):
        rng = np.random.default_rng(99)
        tol = 1e-9
        for _ in range(200):
            topo, flows, paths, caps, demands = random_maxmin_instance(rng)
            rates = allocate_rates(flows, topo)
            load = {key: 0.0 for key in caps}
            for f in flows:
                for key in paths[f.id]:
                    load[key] += rates[f.id]
            for key in caps:
                assert load[key] <= float(caps[key]) + tol
            # max-min certificate: every flow is at its demand cap or crosses a
            # saturated link where it holds a maximal rate
            for f in flows:
                if f.kind is FlowKind.INELASTIC and rates[f.id] >= f.demand_mbps - tol:
                    continue
                has_bottleneck = any(
                    load[key] >= float(caps[key]) - 1e-6
                    and all(rates[g.id] <= rates[f.id] + 1e-6 for g in flows if key in paths[g.id])
                    for key in paths[f.id]
                )
                assert has_bottleneck, f"flow {f.id} has no bottleneck link"


class TestTransferTime:
    def test_ten_megabytes_50mbps_10ms(self):
        topo, links = line_topology(2, bandwidths=[100.0, 50.0], delays=[5.0, 5.0])
        sim = FlowSim(topo)
        flow = elastic_flow("t", "h1", "h3", tuple(links), 10e6)
        sim.start_flow(flow, at=0.0)
        while flow.done_s is None:
            sim.advance()
        assert flow.done_s == pytest.approx(1.610, abs=1e-9)
        prop, trans = transfer_time_components(flow)
        assert prop == pytest.approx(0.010, abs=1e-12)
        assert trans == pytest.approx(1.600, abs=1e-9)

    def test_zero_byte_flow(self):
        topo, links = line_topology(1, delays=[3.0])
        sim = FlowSim(topo)
        flow = elastic_flow("z", "h1", "h2", tuple(links), 0)
        sim.start_flow(flow, at=1.0)
        while flow.done_s is None:
            sim.advance()
        prop, trans = transfer_time_components(flow)
        assert trans == 0.0
        assert flow.done_s == pytest.approx(1.0 + 0.003, abs=1e-12)

    def test_loss_degrades_goodput(self):
        # path loss 1 - 0.99*0.98 = 0.0298 -> transmission scales by 1/0.9702
        topo, links = line_topology(2, bandwidths=[100.0, 100.0], losses=[0.01, 0.02])
        sim = FlowSim(topo)
        flow = elastic_flow("l", "h1", "h3", tuple(links), 1e6)
        sim.start_flow(flow, at=0.0)
        while flow.done_s is None:
            sim.advance()
        expected = (1e6 * 8 / 100e6) / 0.9702
        assert flow.done_s == pytest.approx(expected, rel=1e-12)


class TestAdvance:
    def test_single_flow_completion_time(self):
        # 100 Mbit over 100 Mbps, delay 2 ms -> done at start + 0.002 + 1.0
        topo, links = line_topology(1, delays=[2.0])
        sim = FlowSim(topo)
        flow = elastic_flow("f", "h1", "h2", tuple(links), 100e6 / 8)
        sim.start_flow(flow, at=0.5)
        events = []
        while flow.done_s is None:
            events.append(sim.advance())
        assert flow.done_s == pytest.approx(0.5 + 0.002 + 1.0, abs=1e-9)
        kinds = [e.kind for e in events]
        assert kinds == [EventKind.FLOW_START, EventKind.FLOW_COMPLETE]

    def test_simultaneous_starts_fifo_and_equal_allocation(self):
        topo, links = line_topology(1)
        sim_ab = FlowSim(topo)
        sim_ba = FlowSim(topo)
        for sim, order in ((sim_ab, ("a", "b")), (sim_ba, ("b", "a"))):
            flows = {fid: elastic_flow(fid, "h1", "h2", tuple(links), 1e6) for fid in order}
            for fid in order:
                sim.start_flow(flows[fid], at=0.0)
            sim.advance()
            sim.advance()
            assert sim.allocation() == {"a": 50.0, "b": 50.0}

    def test_clock_never_regresses(self):
        topo, links = line_topology(1)
        sim = FlowSim(topo)
        for i in range(5):
            sim.start_flow(elastic_flow(f"f{i}", "h1", "h2", tuple(links), 1e5), at=0.1 * i)
        last = 0.0
        while sim.has_events():
            sim.advance()
            assert sim.now_s >= last
            last = sim.now_s

    def test_reallocation_extends_completion(self):
        # second flow joins halfway: first flow's completion moves out
        topo, links = line_topology(1)
        sim = FlowSim(topo)
        f1 = elastic_flow("f1", "h1", "h2", tuple(links), 100e6 / 8)  # alone: 1.0 s
        f2 = elastic_flow("f2", "h1", "h2", tuple(links), 100e6 / 8)
        sim.start_flow(f1, at=0.0)
        sim.start_flow(f2, at=0.5)
        while sim.has_events():
            sim.advance()
        # f1: 0.5 s at 100, then shares 50/50 -> remaining 50 Mbit takes 1.0 s
        assert f1.done_s == pytest.approx(1.5, abs=1e-9)
        # f2: 50 at [0.5, 1.5], then alone 100 for remaining 50 Mbit
        assert f2.done_s == pytest.approx(2.0, abs=1e-9)


class TestCountersAndDeterminism:
    def test_counters_conserve_bytes(self):
        topo, links = line_topology(1)
        sim = FlowSim(topo)
        flow = elastic_flow("c", "h1", "h2", tuple(links), 10e6)
        sim.start_flow(flow, at=0.0)
        while flow.done_s is None:
            sim.advance()
        counters = sim.link_counters()
        assert counters["h1"][0] == pytest.approx(10e6, abs=1.0)  # tx at src
        assert counters["h2"][1] == pytest.approx(10e6, abs=1.0)  # rx at dst

    def test_rx_scaled_by_loss(self):
        topo, links = line_topology(2, losses=[0.01, 0.02])
        sim = FlowSim(topo)
        flow = elastic_flow("c", "h1", "h3", tuple(links), 1e6)
        sim.start_flow(flow, at=0.0)
        while flow.done_s is None:
            sim.advance()
        counters = sim.link_counters()
        assert counters["h3"][1] == pytest.approx(0.9702 * counters["h1"][0], rel=1e-9)
        assert counters["h3"][1] == pytest.approx(1e6, abs=1.0)

    def test_idle_network_zero_rates(self):
        topo, _ = line_topology(1)
        sim = FlowSim(topo)
        counters = sim.link_counters()
        assert all(v == (0.0, 0.0, 0.0, 0.0) for v in counters.values())

    def test_bit_identical_event_traces(self):
        def run():
            topo, links = line_topology(3, bandwidths=[80.0, 120.0, 60.0])
            sim = FlowSim(topo)
            rng = np.random.default_rng(5)
            for i in range(10):
                a = int(rng.integers(0, 3))
                b = int(rng.integers(a, 3))
                path = tuple(links[a : b + 1])
                sim.start_flow(
                    elastic_flow(f"f{i}", "h1", "h2", path, float(rng.integers(1e5, 1e7))),
                    at=float(rng.uniform(0, 2)),
                )
            bg = inelastic_flow("bg", "h1", "h4", tuple(links))
            sim.start_flow(bg, at=0.0)
            for k in range(20):
                sim.set_demand("bg", float(rng.integers(0, 50)), at=0.2 * k)
            trace = []
            while sim.has_events():
                ev = sim.advance()
                trace.append((sim.now_s, ev.kind.value, ev.flow_id))
            return trace, sim.link_counters()

        t1, c1 = run()
        t2, c2 = run()
        assert t1 == t2
        assert c1 == c2

    def test_conservation_across_rate_changes(self):
        # delivered bytes equal bytes_total even when the allocation shifts
        # many times mid-flight (tolerance: 1 byte per rate-change segment)
        topo, links = line_topology(2, bandwidths=[90.0, 70.0])
        sim = FlowSim(topo)
        rng = np.random.default_rng(123)
        totals = []
        for i in range(8):
            bytes_total = float(rng.integers(1e5, 5e6))
            flow = elastic_flow(f"f{i}", "h1", "h3", tuple(links), bytes_total)
            sim.start_flow(flow, at=float(rng.uniform(0, 1.0)))
            totals.append(bytes_total)
        # churning background demand on the first link only (h2 endpoint)
        bg = inelastic_flow("bg", "h1", "h2", (links[0],))
        sim.start_flow(bg, at=0.0)
        segments = 40
        for k in range(segments):
            sim.set_demand("bg", float(rng.integers(0, 60)), at=0.05 * k)
        while sim.has_events():
            sim.advance()
        delivered_h3 = sim.link_counters()["h3"][1]
        assert delivered_h3 == pytest.approx(sum(totals), abs=segments + len(totals))

    def test_work_conservation_under_background(self):
        # adding background traffic on a shared link never speeds the transfer
        topo, links = line_topology(2, bandwidths=[100.0, 60.0])

        def transfer_time(with_bg):
            sim = FlowSim(topo)
            flow = elastic_flow("fl", "h1", "h3", tuple(links), 5e6)
            sim.start_flow(flow, at=0.0)
            if with_bg:
                bg = inelastic_flow("bg", "h2", "h3", (links[1],), demand_mbps=40.0)
                sim.start_flow(bg, at=0.0)
            while flow.done_s is None:
                sim.advance()
            return flow.done_s

        assert transfer_time(True) > transfer_time(False)
