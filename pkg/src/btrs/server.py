"""Server assembly and lifecycle: store, service, app, uvicorn."""

from __future__ import annotations

import logging
import sys
from datetime import timedelta

import uvicorn

from .api import create_app
from .config import ServerConfig
from .errors import BtrsError
from .service import BugTracker
from .store import Store

logger = logging.getLogger("btrs.server")


def build_service(config: ServerConfig) -> BugTracker:
    """Open the journal and assemble the service; initializes the bootstrap
    admin's password on first start."""
    try:
        store = Store(config.data_dir)
    except (OSError, BtrsError) as exc:
        raise SystemExit(f"btrs: cannot open journal in {config.data_dir!r}: {exc}")

    service = BugTracker(
        store,
        token_ttl=timedelta(hours=config.token_ttl_hours),
        password_iterations=config.password_iterations,
        cocomo_coefficients=config.cocomo,
    )
    if not service.admin_password_initialized:
        if not config.init_admin_password:
            store.close()
            raise SystemExit(
                "btrs: first start on an empty journal; pass --init-admin-password "
                "to set the built-in admin's password")
        service.init_admin_password(config.init_admin_password)
        logger.info("bootstrap admin password initialized")
    elif config.init_admin_password:
        logger.warning("--init-admin-password ignored: admin password already set")
    return service


def serve(config: ServerConfig) -> None:
    """Run the HTTP service until interrupted; flushes the journal on the
    way out."""
    logging.basicConfig(
        level=logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
        stream=sys.stderr,
    )
    service = build_service(config)
    app = create_app(service, ui_dir=config.ui_dir)
    logger.info("serving on http://%s:%d (data dir %s)", config.bind, config.port,
                config.data_dir)
    try:
        uvicorn.run(app, host=config.bind, port=config.port, access_log=False,
                    log_level="warning")
    finally:
        service.store.close()
        logger.info("journal flushed and closed")
