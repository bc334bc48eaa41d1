package main

import "fmt"

func main() {
	fmt.Println(Version())
	fmt.Println(buildTag)
}
