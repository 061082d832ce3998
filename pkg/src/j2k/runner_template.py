"""Source template for the per-step container entry point (``runner.src``)."""

from __future__ import annotations

from string import Template

RUNNER_TEMPLATE = Template('''\
"""Container entry point for pipeline step $step_id (generated by j2k)."""

import importlib
import json
import os
import pickle
import socket
import threading
import time
import types
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

try:
    import cloudpickle as _pickler
except ImportError:
    _pickler = pickle

STEP_ID = $step_id_repr
EXPORTS = $exports_repr
MOUNT = os.environ.get("J2K_MOUNT", "/mnt/efs")
PORT = int(os.environ.get("J2K_PORT", "8080"))
BROKER = os.environ.get("KAFKA_BROKER", "")
POLL_SECONDS = float(os.environ.get("J2K_POLL_SECONDS", "1.0"))
LOCK_TTL_SECONDS = float(os.environ.get("J2K_LOCK_TTL_SECONDS", "30"))
EXIT_WHEN_DONE = os.environ.get("J2K_EXIT_WHEN_DONE", "") == "1"

_state = {"inputs_ready": False, "done": False}
_namespace = {"__name__": "__main__"}
_producer = None


class _Probes(BaseHTTPRequestHandler):
    def do_GET(self):
        if self.path == "/healthz":
            self._reply(200, "ok")
        elif self.path == "/readiness":
            if _state["inputs_ready"]:
                self._reply(200, "ok")
            else:
                self._reply(503, "waiting for inputs")
        else:
            self._reply(404, "not found")

    def _reply(self, status, body):
        data = body.encode()
        self.send_response(status)
        self.send_header("Content-Type", "text/plain")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def log_message(self, *args):
        pass


def _serve():
    if PORT <= 0:
        return None
    server = ThreadingHTTPServer(("", PORT), _Probes)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread


def _connect_broker():
    if not BROKER:
        return None
    try:
        from kafka import KafkaProducer

        return KafkaProducer(bootstrap_servers=BROKER)
    except Exception as exc:
        print(f"[{STEP_ID}] broker {BROKER!r} unreachable ({exc}); using filesystem bus", flush=True)
        return None


def _path(step, var):
    return os.path.join(MOUNT, step, var)


def _atomic_write(path, data):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    tmp = f"{path}.tmp-{socket.gethostname()}-{os.getpid()}"
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


def wait_for_input(step, var):
    path = _path(step, var)
    while not os.path.exists(path):
        time.sleep(POLL_SECONDS)
    with open(path, "rb") as fh:
        value = pickle.load(fh)
    if isinstance(value, dict) and set(value) == {"__j2k_module__"}:
        value = importlib.import_module(value["__j2k_module__"])
    _namespace[var] = value


def save_output(var):
    value = _namespace[var]
    if isinstance(value, types.ModuleType):
        value = {"__j2k_module__": value.__name__}
    _atomic_write(_path(STEP_ID, var), _pickler.dumps(value))


def publish(topic):
    message = json.dumps({"producer": STEP_ID, "topic": topic, "exports": EXPORTS}).encode()
    if _producer is not None:
        _producer.send(topic, message)
        _producer.flush()
        return
    bus = os.path.join(MOUNT, ".bus")
    os.makedirs(bus, exist_ok=True)
    with open(os.path.join(bus, topic + ".log"), "ab") as fh:
        fh.write(message + b"\\n")


def _done_marker():
    return os.path.join(MOUNT, STEP_ID, ".done")


def _acquire_lock():
    lock = os.path.join(MOUNT, STEP_ID, ".lock")
    os.makedirs(os.path.dirname(lock), exist_ok=True)
    while not os.path.exists(_done_marker()):
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            try:
                if time.time() - os.path.getmtime(lock) > LOCK_TTL_SECONDS:
                    os.remove(lock)
                    continue
            except FileNotFoundError:
                continue
            time.sleep(POLL_SECONDS)
            continue
        os.write(fd, socket.gethostname().encode())
        os.close(fd)
        return True
    return False


def _heartbeat(stop):
    lock = os.path.join(MOUNT, STEP_ID, ".lock")
    while not stop.wait(max(LOCK_TTL_SECONDS / 3, 0.1)):
        try:
            os.utime(lock)
        except FileNotFoundError:
            return


def run_step():
    with open(os.path.join(os.path.dirname(os.path.abspath(__file__)), "step.src")) as fh:
        code = compile(fh.read(), "step.src", "exec")
    exec(code, _namespace)


def main():
    global _producer
    server = _serve()
    _producer = _connect_broker()

$waits
    _state["inputs_ready"] = True

    if _acquire_lock():
        stop = threading.Event()
        threading.Thread(target=_heartbeat, args=(stop,), daemon=True).start()
        run_step()
$saves
$publishes
        _atomic_write(_done_marker(), b"")
        stop.set()
        os.remove(os.path.join(MOUNT, STEP_ID, ".lock"))
    _state["done"] = True
    print(f"[{STEP_ID}] done", flush=True)

    if server is not None and not EXIT_WHEN_DONE:
        server.join()


if __name__ == "__main__":
    main()
''')


def render_runner(step_id: str, inputs: list[tuple[str, str]], exports: list[str], topics: list[str]) -> str:
    waits = [f"    wait_for_input({producer!r}, {var!r})" for producer, var in inputs]
    saves = [f"        save_output({var!r})" for var in exports]
    publishes = [f"        publish({topic!r})" for topic in topics]
    return RUNNER_TEMPLATE.substitute(
        step_id=step_id,
        step_id_repr=repr(step_id),
        exports_repr=repr(list(exports)),
        waits="\n".join(waits) if waits else "    pass  # no inputs",
        saves="\n".join(saves) if saves else "        pass  # no exports",
        publishes="\n".join(publishes) if publishes else "        pass  # no downstream topics",
    )
