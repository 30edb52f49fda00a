import random

import pytest

from otterlink import codec
from otterlink.client import (ApproxTimeSync, DEFAULT_SLOP, SYNC_TOPICS,
                              TopicGateway, TopicSample, UsageError)


def pos_line(utc=0.0):
    return codec.encode_sentence(
        codec.PosReport(utc, 45.0, -76.0, 0.0, 1.0, 90.0))


def att_line(utc=0.0):
    return codec.encode_sentence(
        codec.AttReport(utc, 0.0, 0.0, 90.0, 0.0, 0.0, 0.0))


class TestGatewayDispatch:
    def test_pos_report_fans_out_to_gps_and_cogsog(self):
        gw = TopicGateway()
        seen = []
        gw.subscribe("otter_gps", lambda s: seen.append(s))
        gw.subscribe("otter_cogsog", lambda s: seen.append(s))
        gw.feed_line(pos_line(), stamp=1.25)
        topics = {s.topic for s in seen}
        assert topics == {"otter_gps", "otter_cogsog"}
        assert all(s.stamp == 1.25 for s in seen)
        gps = next(s for s in seen if s.topic == "otter_gps")
        assert gps.payload["lat"] == 45.0

    def test_multiple_consumers_per_topic(self):
        gw = TopicGateway()
        hits = [0, 0]
        gw.subscribe("otter_imu", lambda s: hits.__setitem__(0, hits[0] + 1))
        gw.subscribe("otter_imu", lambda s: hits.__setitem__(1, hits[1] + 1))
        gw.feed_line(att_line(), stamp=0.0)
        assert hits == [1, 1]

    def test_subscribe_command_topic_rejected(self):
        gw = TopicGateway()
        with pytest.raises(UsageError):
            gw.subscribe("control_cmds", lambda s: None)

    def test_subscribe_unknown_topic_rejected(self):
        gw = TopicGateway()
        with pytest.raises(UsageError):
            gw.subscribe("otter_sonar", lambda s: None)

    def test_corrupt_line_counts_but_does_not_raise(self):
        gw = TopicGateway()
        gw.subscribe("otter_gps", lambda s: None)
        gw.feed_line("$POTPOS,garbage*00\r\n", stamp=0.0)
        gw.feed_line("not even framed", stamp=0.1)
        assert gw.decode_errors == 2


class TestPublish:
    def test_sends_exactly_once_and_returns_line(self):
        sent = []
        gw = TopicGateway(command_sender=sent.append)
        line = gw.publish_command("drift_cmds", codec.DriftCmd(True))
        assert sent == [line]
        assert codec.decode_sentence(line) == codec.DriftCmd(True)

    def test_wrong_payload_type_rejected_before_send(self):
        sent = []
        gw = TopicGateway(command_sender=sent.append)
        with pytest.raises(UsageError):
            gw.publish_command("drift_cmds", codec.ManualCmd(0, 0, 0))
        assert sent == []

    def test_invalid_payload_raises_before_send(self):
        sent = []
        gw = TopicGateway(command_sender=sent.append)
        with pytest.raises(codec.RangeError):
            gw.publish_command("control_cmds", codec.ManualCmd(2.0, 0, 0))
        assert sent == []

    def test_not_a_command_topic(self):
        gw = TopicGateway(command_sender=lambda line: None)
        with pytest.raises(UsageError):
            gw.publish_command("otter_gps", codec.DriftCmd(True))


def oracle_match(trace, topics, slop):
    """Straightforward restatement of the matching rule: keep the
    newest *unconsumed* sample per topic; whenever every topic has one
    and their stamps span at most `slop`, emit the set and consume it."""
    latest = {}
    emitted = []
    for sample in trace:
        if sample.topic not in topics:
            continue
        latest[sample.topic] = sample
        if len(latest) == len(topics):
            stamps = [s.stamp for s in latest.values()]
            if max(stamps) - min(stamps) <= slop:
                emitted.append({t: latest[t].stamp for t in topics})
                latest.clear()
    return emitted


def random_trace(rng, n):
    trace = []
    t = 0.0
    for _ in range(n):
        t += rng.uniform(0.0, 0.12)
        topic = rng.choice(SYNC_TOPICS)
        trace.append(TopicSample(topic, round(t, 4), {"k": len(trace)}))
    return trace


class TestApproxTimeSync:
    def test_emits_when_all_topics_inside_window(self):
        out = []
        sync = ApproxTimeSync(SYNC_TOPICS, 0.06, out.append)
        sync.offer(TopicSample("otter_gps", 1.00, {}))
        sync.offer(TopicSample("otter_cogsog", 1.01, {}))
        assert out == []
        sync.offer(TopicSample("otter_imu", 1.05, {}))
        assert len(out) == 1
        assert out[0].stamp == 1.05  # pivot = newest constituent

    def test_stale_sample_replaced_not_matched(self):
        out = []
        sync = ApproxTimeSync(SYNC_TOPICS, 0.06, out.append)
        sync.offer(TopicSample("otter_gps", 1.00, {}))
        sync.offer(TopicSample("otter_imu", 2.00, {}))
        sync.offer(TopicSample("otter_cogsog", 2.01, {}))
        assert out == []  # gps is 1 s stale
        sync.offer(TopicSample("otter_gps", 2.02, {}))
        assert len(out) == 1

    def test_samples_consumed_at_most_once(self):
        out = []
        sync = ApproxTimeSync(("otter_gps", "otter_imu"), 0.06, out.append)
        sync.offer(TopicSample("otter_gps", 1.00, {}))
        sync.offer(TopicSample("otter_imu", 1.01, {}))
        sync.offer(TopicSample("otter_imu", 1.02, {}))
        # second imu alone must not re-pair with the consumed gps sample
        assert len(out) == 1

    def test_bad_construction_rejected(self):
        with pytest.raises(UsageError):
            ApproxTimeSync((), 0.06, lambda s: None)
        with pytest.raises(UsageError):
            ApproxTimeSync(("otter_status",), 0.06, lambda s: None)
        with pytest.raises(UsageError):
            ApproxTimeSync(SYNC_TOPICS, 0.0, lambda s: None)

    def test_matches_oracle_on_random_traces(self):
        rng = random.Random(2024)
        for trial in range(200):
            trace = random_trace(rng, rng.randint(3, 100))
            out = []
            sync = ApproxTimeSync(SYNC_TOPICS, DEFAULT_SLOP, out.append)
            for sample in trace:
                sync.offer(sample)
            expected = oracle_match(trace, SYNC_TOPICS, DEFAULT_SLOP)
            got = [{"otter_gps": s.gps["k"], "otter_imu": s.imu["k"],
                    "otter_cogsog": s.cogsog["k"]} for s in out]
            keyed = [{t: trace[v[t]].stamp for t in SYNC_TOPICS}
                     for v in got]
            assert keyed == expected, f"trial {trial} diverged"
            # invariants regardless of the oracle
            stamps = [s.stamp for s in out]
            assert stamps == sorted(stamps)
            for s in out:
                parts = [s.gps["k"], s.imu["k"], s.cogsog["k"]]
                spread = (max(trace[k].stamp for k in parts)
                          - min(trace[k].stamp for k in parts))
                assert spread <= DEFAULT_SLOP + 1e-12

    def test_gateway_synchronize_end_to_end(self):
        gw = TopicGateway()
        out = []
        gw.synchronize(("otter_gps", "otter_cogsog"), 0.06, out.append)
        gw.feed_line(pos_line(utc=1.0), stamp=0.5)
        # one PosReport feeds both topics at the same stamp -> match
        assert len(out) == 1
        assert out[0].cogsog["sog"] == 1.0
