package main

func Version() string {
	return versionString
}
