from src.utils.event_handler import EventHandler, TrainingEvent


def test_handlers_run_in_registration_order():
    events = EventHandler()
    calls = []
    events.add_handler(TrainingEvent.STEP_END, lambda **kw: calls.append(("first", kw["step"])))
    events.add_handler(TrainingEvent.STEP_END, lambda **kw: calls.append(("second", kw["step"])))
    events.trigger(TrainingEvent.STEP_END, step=4)
    assert calls == [("first", 4), ("second", 4)]


def test_remove_handler():
    events = EventHandler()
    calls = []

    def handler(**_):
        calls.append(1)

    events.add_handler(TrainingEvent.RUN_END, handler)
    assert events.handler_count(TrainingEvent.RUN_END) == 1
    events.remove_handler(TrainingEvent.RUN_END, handler)
    events.remove_handler(TrainingEvent.RUN_END, handler)
    events.trigger(TrainingEvent.RUN_END)
    assert calls == []
    assert events.handler_count(TrainingEvent.RUN_END) == 0


def test_failing_handler_does_not_stop_the_others(caplog):
    events = EventHandler()
    calls = []

    def broken(**_):
        raise RuntimeError("disk full")

    events.add_handler(TrainingEvent.EPOCH_END, broken)
    events.add_handler(TrainingEvent.EPOCH_END, lambda **_: calls.append("ok"))
    events.trigger(TrainingEvent.EPOCH_END, epoch=0)
    assert calls == ["ok"]
    assert "disk full" in caplog.text


def test_trigger_without_handlers():
    EventHandler().trigger(TrainingEvent.CHECKPOINT_SAVED, path="x")
