from .store import CatalogEntry, RegistryStore, SearchQuery, UploadResult
from .service import RegistryService

__all__ = ["CatalogEntry", "RegistryStore", "SearchQuery", "UploadResult", "RegistryService"]
