"""Thin client over the service API.

Without a base URL the client mounts the application in-process (no
network, still exercising the full request/response path); with one it
talks to a remote service over HTTP.
"""

import httpx


class ServiceError(Exception):
    def __init__(self, status_code, detail, violations=()):
        self.status_code = status_code
        self.detail = detail
        self.violations = list(violations)
        super().__init__(detail)


class ServiceClient:
    def __init__(self, base_url=None, timeout=None):
        if base_url:
            self._client = httpx.Client(base_url=base_url, timeout=timeout)
        else:
            import warnings
            with warnings.catch_warnings():
                # starlette wants the httpx2 package, which is not
                # published yet; plain httpx still works
                warnings.filterwarnings("ignore", category=UserWarning,
                                        message=".*httpx2.*")
                from starlette.testclient import TestClient

                from .service import create_app
                self._client = TestClient(create_app())

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, path, payload):
        try:
            resp = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise ServiceError(0, f"service unreachable: {exc}") from None
        if resp.status_code >= 400:
            try:
                body = resp.json().get("detail", {})
            except ValueError:
                body = {}
            if isinstance(body, dict):
                raise ServiceError(resp.status_code,
                                   body.get("detail", resp.text),
                                   body.get("violations", []))
            raise ServiceError(resp.status_code, str(body))
        return resp.json()

    def health(self):
        return self._client.get("/health").json()

    def check_config(self, config_text):
        return self._post("/config/check", {"config_text": config_text})

    def simulate(self, config_text, mode, seed, duration, speed_factor=1.0):
        return self._post("/simulate", {
            "config_text": config_text, "mode": mode, "seed": seed,
            "duration": duration, "speed_factor": speed_factor})

    def analyze(self, config_text, loads=None):
        return self._post("/analyze", {"config_text": config_text,
                                       "loads": loads})

    def validate(self, config_text, mode, seed, duration, tolerance):
        return self._post("/validate", {
            "config_text": config_text, "mode": mode, "seed": seed,
            "duration": duration, "tolerance": tolerance})

    def sweep(self, plan_text):
        return self._post("/sweep", {"plan_text": plan_text})

    def schedule_export(self, config_text):
        return self._post("/schedule/export", {"config_text": config_text})
