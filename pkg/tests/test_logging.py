import logging
import time

from pushforward.logging import WandbConfig, capture_time, describe_version, init_logger, is_wandb_available


def test_capture_time_freezes_on_exit():
    with capture_time() as elapsed:
        time.sleep(0.01)
        inside = elapsed()
    assert inside >= 0.01
    frozen = elapsed()
    time.sleep(0.01)
    assert elapsed() == frozen >= inside


def test_describe_version():
    version = describe_version()
    assert isinstance(version, str) and version


def test_init_logger_writes_the_log_file(tmp_path):
    path = tmp_path / "logs" / "run.log"
    init_logger(path)
    logging.getLogger("pushforward.test").info("hello from the test")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "hello from the test" in path.read_text()
    init_logger(None)


def test_wandb_is_disabled_by_default():
    config = WandbConfig()
    assert not config.enabled
    assert WandbConfig(mode="offline").enabled
    assert not is_wandb_available()
