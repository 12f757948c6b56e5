"""firewx: a fire-weather index engine for wireless weather-sensor streams.

Pipeline: observation CSV -> outlier cleaning -> property-partitioned triple
store -> CONSTRUCT-rule inference with lazy caching -> IDW raster frames ->
HTTP query service with map/timeline/pie frontend.
"""

__version__ = "0.1.0"
