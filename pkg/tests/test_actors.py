import pytest

from taskfarm.actors import (BUSY, COMPUTE_COMPLETE, FREE, Collector, Farmer, Ignore,
                             IndivisibleImage, Mismatch, Mode, Worker, decompose, invert,
                             synthetic_camera)
from taskfarm.errors import ProtocolError
from taskfarm.protocol import (COLLECTOR, DISPATCHER, BlockCouple, NewRun, OutputCouple,
                               Request, Resume, Sleep, SlotAck, Stop, WorkCouple)


def test_decompose_partitions():
    image = bytes(range(12))
    blocks = decompose(image, 3)
    assert [len(b) for b in blocks] == [4, 4, 4]
    assert b"".join(blocks) == image


def test_decompose_single_block():
    assert decompose(b"abc", 1) == [b"abc"]


def test_decompose_indivisible():
    with pytest.raises(IndivisibleImage):
        decompose(bytes(10), 3)


def test_camera_is_seeded():
    assert list(synthetic_camera(2, 8, seed=4)) == list(synthetic_camera(2, 8, seed=4))
    assert list(synthetic_camera(1, 8, seed=4)) != list(synthetic_camera(1, 8, seed=5))


# -- farmer --

def farmer(m, images):
    return Farmer(m, iter(images))


def test_bootstrap_with_lookahead():
    f = farmer(3, [b"abc", b"def"])
    out = f.bootstrap()
    assert [msg for _, msg in out] == [BlockCouple(1, b"a"), BlockCouple(2, b"b"),
                                       BlockCouple(3, b"c"), NewRun()]
    assert all(dst == DISPATCHER for dst, _ in out)
    assert f.next_blocks == [b"d", b"e", b"f"]


def test_bootstrap_last_run():
    f = farmer(3, [b"abc"])
    assert f.bootstrap()[-1] == (DISPATCHER, NewRun())
    assert f.next_blocks is None


def test_bootstrap_without_input():
    f = farmer(3, [])
    assert f.bootstrap() == [(DISPATCHER, Stop())]
    assert f.stopped


def test_acks_pipeline_next_image():
    f = farmer(2, [b"ab", b"cd"])
    f.bootstrap()
    assert f.on_ack(1) == [(DISPATCHER, BlockCouple(1, b"c"))]
    assert f.on_ack(2) == [(DISPATCHER, BlockCouple(2, b"d")), (DISPATCHER, NewRun())]
    assert f.runs_started == 2


def test_final_ack_stops():
    f = farmer(2, [b"ab"])
    f.bootstrap()
    assert f.on_ack(2) == []
    assert f.on_ack(1) == [(DISPATCHER, Stop())]
    assert f.stopped


def test_duplicate_ack_ignored():
    f = farmer(2, [b"ab", b"cd"])
    f.bootstrap()
    f.on_ack(1)
    assert f.on_ack(1) == []


def test_external_stop_once():
    f = farmer(1, [b"a"])
    f.bootstrap()
    assert f.external_stop() == [(DISPATCHER, Stop())]
    assert f.external_stop() == []


# -- worker --

def computing(k=5):
    w = Worker(2)
    w.start()
    w.step(WorkCouple(k, b"\x00\x10"))
    return w


def test_worker_computes_and_requests_again():
    w = computing()
    out = w.step(COMPUTE_COMPLETE)
    assert out == [(COLLECTOR, OutputCouple(5, b"\xff\xef")), (DISPATCHER, Request(2))]
    assert w.mode is Mode.REQUESTING


def test_resume_abandons_block():
    w = computing()
    assert w.step(Resume()) == [(DISPATCHER, Request(2))]
    assert w.mode is Mode.REQUESTING and w.k is None


def test_sleeping_worker_resumes():
    w = Worker(2)
    w.start()
    assert w.step(Sleep()) == []
    assert w.step(Resume()) == [(DISPATCHER, Request(2))]


def test_resume_while_requesting_is_ignored():
    w = Worker(1)
    w.start()
    assert w.step(Resume()) == []
    assert w.mode is Mode.REQUESTING


@pytest.mark.parametrize("mode_msgs", [
    [Sleep()],
    [WorkCouple(1, b"")],
    [],
])
def test_stop_terminates_from_any_mode(mode_msgs):
    w = Worker(1)
    w.start()
    for msg in mode_msgs:
        w.step(msg)
    assert w.step(Stop()) == []
    assert w.mode is Mode.STOPPED
    with pytest.raises(ProtocolError):
        w.step(Resume())


@pytest.mark.parametrize("setup,msg", [
    ([Sleep()], WorkCouple(1, b"")),
    ([WorkCouple(1, b"")], WorkCouple(2, b"")),
    ([WorkCouple(1, b"")], Sleep()),
    ([], COMPUTE_COMPLETE),
    ([], NewRun()),
])
def test_illegal_transitions(setup, msg):
    w = Worker(1)
    w.start()
    for m in setup:
        w.step(m)
    with pytest.raises(ProtocolError):
        w.step(msg)


def test_invert_default():
    assert invert(b"\x00\xff\x0f") == b"\xff\x00\xf0"


# -- collector --

def test_collector_completes_run():
    c = Collector(2)
    assert c.on_output(1, b"a") == ([(DISPATCHER, SlotAck(1))], None)
    out, artifact = c.on_output(2, b"b")
    assert out == [(DISPATCHER, SlotAck(2))]
    assert artifact == b"ab" and c.sink == [b"ab"]
    assert c.f == [FREE, FREE] and c.runs_completed == 1


def test_identical_duplicate_is_ignored():
    c = Collector(2)
    c.on_output(1, b"a")
    assert c.on_output(1, b"a") == ([], None)
    assert c.verdicts == [(1, Ignore())]
    assert c.duplicate_outputs == 1 and c.mismatches == 0


def test_differing_duplicate_is_a_mismatch():
    c = Collector(2)
    c.on_output(1, b"a")
    c.on_output(1, b"z")
    assert isinstance(c.verdicts[0][1], Mismatch)
    assert c.mismatches == 1


def test_custom_hook_and_post_process():
    seen = []
    c = Collector(2, detect_hook=lambda k, a, b: seen.append((k, a, b)) or Ignore(),
                  post_process=lambda parts: b"|".join(parts))
    c.on_output(2, b"y")
    c.on_output(2, b"q")
    _, art = c.on_output(1, b"x")
    assert art == b"x|y"
    assert seen == [(2, b"y", b"q")]


def test_clean_stop():
    assert Collector(4).on_stop() == 0


def test_stop_with_partials():
    c = Collector(8)
    for k in (2, 5, 7):
        c.on_output(k, b"o")
    assert c.f.count(BUSY) == 3
    assert c.on_stop() == 3 and c.stopped


def test_stop_after_run_boundary():
    c = Collector(2)
    c.on_output(1, b"a")
    c.on_output(2, b"b")
    assert c.on_stop() == 0
