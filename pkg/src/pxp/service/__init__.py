"""FastAPI service, WebSocket gateway and the handlers the CLI shares."""
from __future__ import annotations
